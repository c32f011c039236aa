//! Every flag of every subcommand must appear, with a description, in `--help`.

use clap::CommandFactory;
use mlrate_cli::Cli;

fn help_text(sub: &str) -> String {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = mlrate_cli::run_with_args(["mlrate", sub, "--help"], &mut out, &mut err);
    assert_eq!(code, 0);
    String::from_utf8(out).unwrap()
}

#[test]
fn every_flag_is_documented() {
    let root = Cli::command();
    let mut checked = 0;
    for sub in root.get_subcommands() {
        let name = sub.get_name();
        if name == "help" {
            continue;
        }
        let text = help_text(name);
        for arg in sub.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            let label = match arg.get_long() {
                Some(long) => format!("--{long}"),
                None => format!("<{}>", id.to_uppercase()),
            };
            assert!(text.contains(&label), "`{name} --help` does not mention {label}:\n{text}");
            let documented = arg.get_help().is_some_and(|h| !h.to_string().trim().is_empty());
            assert!(documented, "{name} {label} has no help text");
            checked += 1;
        }
    }
    assert!(checked > 40, "only {checked} flags checked");
}

#[test]
fn top_level_help_lists_subcommands() {
    let mut out = Vec::new();
    let code = mlrate_cli::run_with_args(["mlrate", "--help"], &mut out, &mut Vec::new());
    assert_eq!(code, 0);
    let text = String::from_utf8(out).unwrap();
    for sub in ["estimate", "simulate", "train", "predict", "generate"] {
        assert!(text.contains(sub), "{sub}");
    }
}
