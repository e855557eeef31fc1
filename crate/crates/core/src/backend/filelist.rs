// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::fmt::Write;

use serde_json::{json, Map, Value};

use super::{write_if_changed, BackendContext, BackendResult};
use crate::error::{Error, Result};
use crate::graph::render_define;
use crate::ip::SourceLanguage;
use crate::target::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilelistFormat {
    /// `+incdir+` / `+define+` / path lines.
    F,
    Json,
}

impl FilelistFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FilelistFormat::F => "f",
            FilelistFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for FilelistFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(FilelistFormat::F),
            "json" => Ok(FilelistFormat::Json),
            other => Err(Error::BadOption(format!("unknown filelist format `{other}`"))),
        }
    }
}

/// Renders the filelist for the current overlay, returning the text and any
/// warnings (duplicate files, overridden defines).
pub fn render_filelist(
    ctx: &BackendContext<'_>,
    langs: &[SourceLanguage],
    format: FilelistFormat,
) -> Result<(String, Vec<String>)> {
    let sources = ctx.sources(langs)?;
    let props = ctx.properties(langs);
    let mut warnings = props.warnings.clone();

    let mut first_owner = HashMap::new();
    for s in &sources {
        if let Some(owner) = first_owner.insert(&s.path, &s.ip) {
            warnings.push(format!("{} is listed by both {} and {}", s.path.display(), owner, s.ip));
        }
    }

    let text = match format {
        FilelistFormat::F => {
            let mut out = String::new();
            for dir in &props.include_dirs {
                let _ = writeln!(out, "+incdir+{}", dir.display());
            }
            for (key, value) in &props.defines {
                let _ = writeln!(out, "+define+{}", render_define(key, value));
            }
            for s in &sources {
                let _ = writeln!(out, "{}", s.path.display());
            }
            out
        }
        FilelistFormat::Json => {
            let mut defines: Vec<_> = props.defines.iter().collect();
            defines.sort_by(|a, b| a.0.cmp(b.0));
            let defines: Map<String, Value> = defines
                .into_iter()
                .map(|(k, v)| (k.clone(), v.clone().map_or(Value::Null, Value::String)))
                .collect();
            let doc = json!({
                "incdirs": props.include_dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>(),
                "defines": defines,
                "sources": sources.iter().map(|s| s.path.display().to_string()).collect::<Vec<_>>(),
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
            text.push('\n');
            text
        }
    };
    Ok((text, warnings))
}

/// Options: `format` (`f` | `json`, default `f`), `languages` (default the
/// HDL languages), `target` (default `filelist`), `output` (file name under
/// the build directory, default `<root-name>.<format>`).
pub fn builtin_filelist(ctx: &mut BackendContext<'_>) -> Result<BackendResult> {
    let format: FilelistFormat = ctx.option_str("format")?.unwrap_or("f").parse()?;
    let langs = ctx.option_langs(&SourceLanguage::HDL)?;
    let name = ctx.option_target_name("filelist")?;
    let file_name = match ctx.option_str("output")? {
        Some(o) => o.to_string(),
        None => format!("{}.{}", ctx.root().name, format.extension()),
    };
    let (text, warnings) = render_filelist(ctx, &langs, format)?;

    // The content is fixed at plan time; the target publishes it.
    let staged = ctx
        .build_dir
        .join(".socbuild")
        .join("gen")
        .join(format!("{name}.{}", format.extension()));
    write_if_changed(&staged, text.as_bytes())?;
    let output = ctx.build_dir.join(file_name);
    let staged_arg = staged.display().to_string();
    let output_arg = output.display().to_string();
    let target = Target::new(name, ctx.helper_command(&["copy", &staged_arg, &output_arg]))
        .inputs([staged])
        .inputs(ctx.sources(&langs)?.into_iter().map(|s| s.path))
        .outputs([&output]);
    Ok(BackendResult {
        targets: vec![target],
        artifacts: vec![output],
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::ip::BackendOptions;
    use crate::ip::OptionValue;
    use crate::ip::SourceLanguage::*;

    fn diamond(dir: &std::path::Path) -> crate::graph::ResolvedGraph {
        graph(vec![
            block(
                &dir.join("top"),
                "v::l::top::1.0.0",
                &["v::l::b", "v::l::c"],
                &[(Verilog, "top.v", "")],
            ),
            block(&dir.join("b"), "v::l::b::1.0.0", &["v::l::d"], &[(Verilog, "b.v", "")]),
            block(&dir.join("c"), "v::l::c::1.0.0", &["v::l::d"], &[(Verilog, "c.v", "")]),
            block(&dir.join("d"), "v::l::d::1.0.0", &[], &[(Verilog, "d.v", "")]),
        ])
    }

    #[test]
    fn diamond_sources_in_flatten_order() {
        let dir = tempfile::tempdir().unwrap();
        let g = diamond(dir.path());
        let ctx = BackendContext::new(&g, dir.path().join("build"));
        let (text, warnings) = render_filelist(&ctx, &SourceLanguage::HDL, FilelistFormat::F).unwrap();
        let expected: String = ["d/d.v", "b/b.v", "c/c.v", "top/top.v"]
            .iter()
            .map(|p| format!("{}\n", dir.path().join(p).display()))
            .collect();
        assert_eq!(text, expected);
        assert!(warnings.is_empty());
    }

    #[test]
    fn properties_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let mut top = block(dir.path(), "v::l::top::1.0.0", &[], &[(SystemVerilog, "a.sv", "")]);
        top.add_include_dir(SystemVerilog, dir.path().join("inc")).unwrap();
        top.add_define(SystemVerilog, "WIDTH", Some("8")).unwrap();
        top.add_define(SystemVerilog, "SIM", None).unwrap();
        let g = graph(vec![top]);
        let ctx = BackendContext::new(&g, dir.path().join("build"));
        let (text, _) = render_filelist(&ctx, &SourceLanguage::HDL, FilelistFormat::F).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("+incdir+{}", dir.path().join("inc").display()));
        assert_eq!(lines[1..3], ["+define+WIDTH=8", "+define+SIM"]);

        let (json_text, _) = render_filelist(&ctx, &SourceLanguage::HDL, FilelistFormat::Json).unwrap();
        let v: Value = serde_json::from_str(&json_text).unwrap();
        let keys: Vec<&String> = v["defines"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["SIM", "WIDTH"]);
        assert_eq!(v["defines"]["SIM"], Value::Null);
        assert_eq!(v["sources"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn empty_design_still_gets_a_target() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(vec![block(dir.path(), "v::l::top::1.0.0", &[], &[])]);
        let mut ctx = BackendContext::new(&g, dir.path().join("build")).with_helper("/bin/socbuild");
        let res = builtin_filelist(&mut ctx).unwrap();
        assert_eq!(res.targets.len(), 1);
        let t = &res.targets[0];
        assert_eq!(t.outputs, [dir.path().join("build/top.f")]);
        assert_eq!(t.command[..3], ["/bin/socbuild", "__internal", "copy"]);
        assert_eq!(std::fs::read(&t.inputs[0]).unwrap(), b"");
    }

    #[test]
    fn duplicate_files_warn_and_missing_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let shared = dir.path().join("shared.v");
        std::fs::write(&shared, "").unwrap();
        let mut a = block(dir.path(), "v::l::a::1.0.0", &["v::l::b"], &[]);
        let mut b = block(dir.path(), "v::l::b::1.0.0", &[], &[]);
        a.add_sources(Verilog, [&shared]).unwrap();
        b.add_sources(Verilog, [&shared]).unwrap();
        let g = graph(vec![a, b]);
        let ctx = BackendContext::new(&g, dir.path().join("build"));
        let (text, warnings) = render_filelist(&ctx, &SourceLanguage::HDL, FilelistFormat::F).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(warnings.len(), 1);

        std::fs::remove_file(&shared).unwrap();
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        ctx.options = BackendOptions::from([("format".into(), OptionValue::Str("json".into()))]);
        assert_eq!(builtin_filelist(&mut ctx).unwrap_err().code(), "E_MISSING_FILE");
    }
}
