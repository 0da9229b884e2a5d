//! The thesis-grading example project: a class model with a «user» class, the
//! two-referee `GradeThesis` activity, its pages, an application model, and
//! seed users. Used by `wisflow init` and throughout the tests.

pub const CLASS_FILE: &str = "theses.cd";
pub const CLASS_MODEL: &str = r#"// Data model for thesis grading.
classdiagram Theses {
    class ThesisData {
        grade1: Decimal;
        grade2: Decimal;
        -> primaryRef: Staff one;
        -> secondaryRef: Staff one;
    }

    class Staff <<user>> {
        login: String;
        password: String;
        name: String;
        email: Email;
        role: String;
    }
}
"#;

pub const ACTIVITY_FILE: &str = "GradeThesis.act";
pub const ACTIVITY: &str = r#"activity GradeThesis {

    role Referee1 { AssignRef2, SetGrade1 }
    role Referee2 { SetGrade2, Saved }

    action AssignRef2 {
        out : ThesisData o;
        var : Set<Staff> allStaff, Staff actualUser, Staff selectedUser;

        cmd : allStaff = Staff.loadAll();
        cmd : actualUser = getActualUser();
        view : SelectSecondaryRef(allStaff);
        java : {
            selectedUser = allStaff.iterator().next();
            o = new ThesisData();
            o.setPrimaryRef(actualUser);
            o.setSecondaryRef(selectedUser);
        }
        cmd : assignRole(Referee2, selectedUser)
    }

    action SetGrade1 {
        in : ThesisData i;
        out : ThesisData o;

        view : SetGrade1Page(i);
        java : {
            o = i;
        }
    }

    action SetGrade2 {
        in : ThesisData i;
        out : ThesisData o;

        view : SetGrade2Page(i);
        java : {
            o = i;
        }
    }

    // persists the grades and tells every participant
    action SaveAndNotify {
        in : ThesisData i;
        out : ThesisData o;

        cmd : save(i);
        cmd : notify("The thesis has been graded.");
        java : {
            o = i;
        }
    }

    action Save {
        in : ThesisData i;
        out : ThesisData o;

        cmd : save(i);
        java : {
            o = i;
        }
    }

    action Saved {
        in : ThesisData i;

        view : SavedPage(i);
    }

    initial -> AssignRef2;
    AssignRef2.o -> SetGrade1.i;
    SetGrade1.o -> SetGrade2.i;
    SetGrade2.o -> SaveAndNotify.i | Save.i;
    SaveAndNotify.o -> Saved.i;
    Save.o -> Saved.i;
    Saved -> final;
}
"#;

pub const PAGES: &[(&str, &str)] = &[
    (
        "SelectSecondaryRef.page",
        r#"page SelectSecondaryRef(Set<Staff> staff) {
    heading 1 "Select the second referee";
    text "Choose the staff member who grades the thesis second.";
    table staff selectable (name, email);
}
"#,
    ),
    (
        "SetGrade1Page.page",
        r#"page SetGrade1Page(ThesisData thesis) {
    heading 1 "First grade";
    input thesis.grade1;
}
"#,
    ),
    (
        "SetGrade2Page.page",
        r#"page SetGrade2Page(ThesisData thesis) {
    heading 1 "Second grade";
    output thesis.grade1;
    input thesis.grade2;
}
"#,
    ),
    (
        "SavedPage.page",
        r#"page SavedPage(ThesisData thesis) {
    heading 1 "Saved";
    text "The grades have been saved.";
    output thesis;
}
"#,
    ),
    (
        "Welcome.page",
        r#"page Welcome() {
    heading 1 "Thesis management";
    text "Start a grading workflow from the menu.";
}
"#,
    ),
];

pub const APP_FILE: &str = "theses.app";
pub const APP: &str = r#"app ThesisManager {
    roles guest, lecturer, student;

    menu {
        page Welcome;
        activity GradeThesis;
        list Staff;
        create Staff;
        list ThesisData;
    }

    rights lecturer {
        page Welcome;
        activity GradeThesis;
        list Staff;
        create Staff;
        list ThesisData;
    }

    rights student {
        page Welcome;
        list ThesisData;
    }

    rights guest {
        page Welcome;
    }
}
"#;

pub const SEED_FILE: &str = crate::project::SEED_FILE;
pub const SEED: &str = r#"{
  "objects": [
    {
      "class": "Staff",
      "fields": {
        "login": "ref1",
        "password": "ref1-secret",
        "name": "Ada Referee",
        "email": "ada@uni.example",
        "role": "lecturer"
      }
    },
    {
      "class": "Staff",
      "fields": {
        "login": "ref2",
        "password": "ref2-secret",
        "name": "Grace Referee",
        "email": "grace@uni.example",
        "role": "lecturer"
      }
    }
  ]
}
"#;

/// Every model file of the example project as `(file name, contents)`.
pub fn model_files() -> Vec<(&'static str, &'static str)> {
    let mut files = vec![(CLASS_FILE, CLASS_MODEL), (ACTIVITY_FILE, ACTIVITY), (APP_FILE, APP)];
    files.extend_from_slice(PAGES);
    files
}

/// Writes the example project into `dir`.
pub fn write_project(dir: &std::path::Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in model_files() {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join(SEED_FILE), SEED)
}
