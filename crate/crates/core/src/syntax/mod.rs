//! The textual modeling languages: class diagrams (`.cd`), activities
//! (`.act`), pages (`.page`), and the application model (`.app`).

pub mod ast;
pub mod diagnostic;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use diagnostic::{has_errors, Diagnostic, Location, Severity};
pub use parser::{parse_activity, parse_app, parse_class_model, parse_page, parse_script_block, ParseResult};
pub use pretty::{pretty_activity, pretty_app, pretty_class_model, pretty_page};

/// Any of the four model kinds, for callers that handle them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Class(ast::ClassModel),
    Activity(ast::ActivityModel),
    Page(ast::PageModel),
    App(ast::AppModel),
}

pub fn pretty_print(model: &Model) -> String {
    match model {
        Model::Class(m) => pretty_class_model(m),
        Model::Activity(m) => pretty_activity(m),
        Model::Page(m) => pretty_page(m),
        Model::App(m) => pretty_app(m),
    }
}

/// Parses `source` as the model kind implied by the extension of `file`.
pub fn parse_by_extension(file: &str, source: &str) -> Option<ParseResult<Model>> {
    let ext = std::path::Path::new(file).extension()?.to_str()?;
    Some(match ext {
        "cd" => parse_class_model(file, source).map(Model::Class),
        "act" => parse_activity(file, source).map(Model::Activity),
        "page" => parse_page(file, source).map(Model::Page),
        "app" => parse_app(file, source).map(Model::App),
        _ => return None,
    })
}
