// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::sync::LazyLock;

use regex::Regex;

use super::{BackendContext, BackendResult};
use crate::error::{Error, Result};
use crate::graph::render_define;
use crate::ip::SourceLanguage;
use crate::target::Target;

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([^{}]*)\}").unwrap());

/// Values available to a command template.
#[derive(Debug, Clone, Default)]
pub struct TemplateVars {
    pub sources: Vec<String>,
    pub incdirs: Vec<String>,
    /// Rendered as `KEY` or `KEY=VALUE`.
    pub defines: Vec<String>,
    pub build_dir: String,
    pub root: String,
}

/// Expands a command template.
///
/// An argument that is exactly `{sources}`, `{incdirs:PREFIX}` or
/// `{defines:PREFIX}` splices one argument per item, each prefixed with
/// `PREFIX` (which may be empty or omitted). `{build_dir}` and `{root}` are
/// substituted anywhere inside an argument.
pub fn expand_template(template: &[String], vars: &TemplateVars) -> Result<Vec<String>> {
    if template.is_empty() {
        return Err(Error::BadTemplate(String::new()));
    }
    let mut argv = Vec::new();
    for arg in template {
        if let Some(items) = splice(arg, vars) {
            argv.extend(items);
            continue;
        }
        let mut bad = None;
        let expanded = PLACEHOLDER.replace_all(arg, |c: &regex::Captures<'_>| match &c[1] {
            "build_dir" => vars.build_dir.clone(),
            "root" => vars.root.clone(),
            other => {
                bad.get_or_insert_with(|| format!("{{{other}}}"));
                String::new()
            }
        });
        if let Some(p) = bad {
            return Err(Error::BadTemplate(p));
        }
        argv.push(expanded.into_owned());
    }
    Ok(argv)
}

fn splice(arg: &str, vars: &TemplateVars) -> Option<Vec<String>> {
    let inner = arg.strip_prefix('{')?.strip_suffix('}')?;
    let (name, prefix) = inner.split_once(':').unwrap_or((inner, ""));
    let items = match name {
        "sources" => &vars.sources,
        "incdirs" => &vars.incdirs,
        "defines" => &vars.defines,
        _ => return None,
    };
    Some(items.iter().map(|i| format!("{prefix}{i}")).collect())
}

/// Options: `command` (argv template, required), `target` (default
/// `tool`), `outputs` (paths, templated with `{build_dir}`/`{root}`),
/// `languages` (default the HDL languages).
pub fn builtin_tool_cmd(ctx: &mut BackendContext<'_>) -> Result<BackendResult> {
    let template = ctx
        .option_list("command")?
        .ok_or_else(|| Error::BadOption("`command` is required".into()))?;
    let name = ctx.option_target_name("tool")?;
    let langs = ctx.option_langs(&SourceLanguage::HDL)?;
    let sources = ctx.sources(&langs)?;
    let props = ctx.properties(&langs);
    let vars = TemplateVars {
        sources: sources.iter().map(|s| s.path.display().to_string()).collect(),
        incdirs: props.include_dirs.iter().map(|d| d.display().to_string()).collect(),
        defines: props.defines.iter().map(|(k, v)| render_define(k, v)).collect(),
        build_dir: ctx.build_dir.display().to_string(),
        root: ctx.root().name.to_string(),
    };
    let argv = expand_template(&template, &vars)?;
    let mut outputs = Vec::new();
    for o in ctx.option_list("outputs")?.unwrap_or_default() {
        let expanded = expand_template(&[o], &vars)?;
        let path = PathBuf::from(&expanded[0]);
        outputs.push(if path.is_absolute() {
            path
        } else {
            ctx.build_dir.join(path)
        });
    }
    let target = Target::new(name, argv)
        .inputs(sources.into_iter().map(|s| s.path))
        .outputs(outputs.iter().cloned());
    Ok(BackendResult {
        targets: vec![target],
        artifacts: outputs,
        warnings: props.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn vars() -> TemplateVars {
        TemplateVars {
            sources: strings(&["s1.v", "s2.v"]),
            incdirs: strings(&["d1", "d2"]),
            defines: strings(&["SIM", "W=8"]),
            build_dir: "/b".into(),
            root: "top".into(),
        }
    }

    #[test]
    fn splices_sources() {
        let argv = expand_template(&strings(&["lint", "{sources}"]), &vars()).unwrap();
        assert_eq!(argv, ["lint", "s1.v", "s2.v"]);
    }

    #[test]
    fn prefix_join() {
        let argv = expand_template(&strings(&["{incdirs:-I}", "{defines:-D}", "{incdirs}"]), &vars()).unwrap();
        assert_eq!(argv, ["-Id1", "-Id2", "-DSIM", "-DW=8", "d1", "d2"]);
    }

    #[test]
    fn literals_and_unknowns() {
        let argv = expand_template(&strings(&["-o", "{build_dir}/{root}.out"]), &vars()).unwrap();
        assert_eq!(argv, ["-o", "/b/top.out"]);
        let err = expand_template(&strings(&["x", "{bogus}"]), &vars()).unwrap_err();
        assert_eq!(err.code(), "E_BAD_TEMPLATE");
        // Splice placeholders cannot sit inside a larger argument.
        let err = expand_template(&strings(&["--files={sources}"]), &vars()).unwrap_err();
        assert_eq!(err.code(), "E_BAD_TEMPLATE");
        assert_eq!(expand_template(&[], &vars()).unwrap_err().code(), "E_BAD_TEMPLATE");
    }
}
