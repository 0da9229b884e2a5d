//! Copies of the example project that each break exactly one linker rule.

use wisflow_core::fixture;

pub struct Mutation {
    /// The diagnostic code the broken project must produce.
    pub code: &'static str,
    pub what: &'static str,
    pub file: &'static str,
    /// `(original, replacement)` pairs applied once each, in order.
    pub edits: &'static [(&'static str, &'static str)],
}

pub const MUTATIONS: &[Mutation] = &[
    Mutation {
        code: "L001",
        what: "variable typed with an undeclared class",
        file: fixture::ACTIVITY_FILE,
        edits: &[(
            "action Save {\n        in : ThesisData i;\n        out : ThesisData o;\n",
            "action Save {\n        in : ThesisData i;\n        out : ThesisData o;\n        var : Grade g;\n",
        )],
    },
    Mutation {
        code: "L002",
        what: "input on a missing attribute",
        file: "SetGrade1Page.page",
        edits: &[("input thesis.grade1;", "input thesis.grade3;")],
    },
    Mutation {
        code: "L003",
        what: "view of an undeclared page",
        file: fixture::ACTIVITY_FILE,
        edits: &[("view : SetGrade1Page(i);", "view : SetGradePage(i);")],
    },
    Mutation {
        code: "L004",
        what: "role assignment to an undeclared partition",
        file: fixture::ACTIVITY_FILE,
        edits: &[("assignRole(Referee2, selectedUser)", "assignRole(Referee3, selectedUser)")],
    },
    Mutation {
        code: "L005",
        what: "menu entry naming an undeclared activity",
        file: fixture::APP_FILE,
        edits: &[("menu {\n        page Welcome;\n        activity GradeThesis;", "menu {\n        page Welcome;\n        activity GradeThesiss;")],
    },
    Mutation {
        code: "L006",
        what: "edge between pins of different types",
        file: fixture::ACTIVITY_FILE,
        edits: &[
            ("        out : ThesisData o;\n\n        view : SetGrade1Page", "        out : ThesisData o, Staff p;\n\n        view : SetGrade1Page"),
            ("SetGrade1.o -> SetGrade2.i;", "SetGrade1.p -> SetGrade2.i;"),
        ],
    },
    Mutation {
        code: "L007",
        what: "reachable in-pin without an incoming edge",
        file: fixture::ACTIVITY_FILE,
        edits: &[("action Saved {\n        in : ThesisData i;", "action Saved {\n        in : ThesisData i, ThesisData j;")],
    },
    Mutation {
        code: "L008",
        what: "user class without a password attribute",
        file: fixture::CLASS_FILE,
        edits: &[("password: String;", "passwd: String;")],
    },
    Mutation {
        code: "L009",
        what: "interactive action outside every partition",
        file: fixture::ACTIVITY_FILE,
        edits: &[("role Referee2 { SetGrade2, Saved }", "role Referee2 { SetGrade2 }")],
    },
    Mutation {
        code: "L010",
        what: "cycle among automatic actions",
        file: fixture::ACTIVITY_FILE,
        edits: &[
            ("SaveAndNotify.o -> Saved.i;", "SaveAndNotify.o -> Save.i;"),
            ("Save.o -> Saved.i;", "Save.o -> SaveAndNotify.i;"),
        ],
    },
];

impl Mutation {
    /// The example project's model files with this mutation applied.
    pub fn files(&self) -> Vec<(String, String)> {
        fixture::model_files()
            .into_iter()
            .map(|(name, text)| {
                let mut text = text.to_string();
                if name == self.file {
                    for (from, to) in self.edits {
                        assert_eq!(text.matches(from).count(), 1, "edit anchor `{from}` in {name}");
                        text = text.replacen(from, to, 1);
                    }
                }
                (name.to_string(), text)
            })
            .collect()
    }
}
