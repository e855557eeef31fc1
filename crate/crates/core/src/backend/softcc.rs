// SPDX-License-Identifier: Apache-2.0

use super::{sanitize, BackendContext, BackendResult};
use crate::error::{Error, Result};
use crate::graph::render_define;
use crate::ip::SourceLanguage;
use crate::target::Target;

const SOFTWARE: [SourceLanguage; 3] = [SourceLanguage::C, SourceLanguage::Cpp, SourceLanguage::Asm];

/// One compile target per C/C++/assembly source plus one link target.
///
/// Options: `toolchain_prefix` (default empty), `output` (ELF name without
/// extension, default the root name), `cflags` and `ldflags` (extra args).
pub fn builtin_softcc(ctx: &mut BackendContext<'_>) -> Result<BackendResult> {
    let prefix = ctx.option_str("toolchain_prefix")?.unwrap_or("").to_string();
    let output = match ctx.option_str("output")? {
        Some(o) => o.to_string(),
        None => ctx.root().name.to_string(),
    };
    let cflags = ctx.option_list("cflags")?.unwrap_or_default();
    let ldflags = ctx.option_list("ldflags")?.unwrap_or_default();

    let sources = ctx.sources(&SOFTWARE)?;
    if sources.is_empty() {
        return Err(Error::NoSources(ctx.root().to_string()));
    }
    let props = ctx.properties(&SOFTWARE);
    let gcc = format!("{prefix}gcc");
    let gxx = format!("{prefix}g++");

    let mut result = BackendResult {
        warnings: props.warnings.clone(),
        ..Default::default()
    };
    let mut objects = Vec::new();
    for s in &sources {
        let file = s
            .path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let flat = s.ip.flat_name();
        let obj = ctx.build_dir.join("obj").join(&flat).join(format!("{file}.o"));
        let driver = if s.lang == SourceLanguage::Cpp { &gxx } else { &gcc };
        let mut argv = vec![driver.clone(), "-c".to_string()];
        argv.extend(props.include_dirs.iter().map(|d| format!("-I{}", d.display())));
        argv.extend(props.defines.iter().map(|(k, v)| format!("-D{}", render_define(k, v))));
        argv.extend(cflags.iter().cloned());
        argv.extend([s.path.display().to_string(), "-o".into(), obj.display().to_string()]);
        result.targets.push(
            Target::new(format!("cc-{flat}-{}", sanitize(&file)), argv)
                .inputs([s.path.clone()])
                .outputs([obj.clone()]),
        );
        objects.push(obj);
    }

    let linker = if sources.iter().any(|s| s.lang == SourceLanguage::Cpp) {
        gxx
    } else {
        gcc
    };
    let elf = ctx.build_dir.join(format!("{output}.elf"));
    let mut argv = vec![linker];
    argv.extend(objects.iter().map(|o| o.display().to_string()));
    argv.extend(ldflags);
    argv.extend(["-o".to_string(), elf.display().to_string()]);
    result.targets.push(
        Target::new(format!("link-{}", sanitize(&output)), argv)
            .inputs(objects)
            .outputs([elf.clone()]),
    );
    result.artifacts.push(elf);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::exec::assemble_plan;
    use crate::ip::SourceLanguage::*;
    use crate::ip::{BackendOptions, OptionValue};

    fn opts(pairs: &[(&str, &str)]) -> BackendOptions {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), OptionValue::Str(v.to_string())))
            .collect()
    }

    #[test]
    fn three_c_sources() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = block(
            dir.path(),
            "v::l::fw::1.0.0",
            &[],
            &[(C, "main.c", ""), (C, "uart.c", ""), (C, "gpio.c", "")],
        );
        b.add_include_dir(C, "inc").unwrap();
        b.add_define(C, "BAUD", Some("9600")).unwrap();
        let g = graph(vec![b]);
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        ctx.options = opts(&[("toolchain_prefix", "riscv64-unknown-elf-")]);
        let res = builtin_softcc(&mut ctx).unwrap();
        assert_eq!(res.targets.len(), 4);
        for t in &res.targets[..3] {
            assert_eq!(t.command[0], "riscv64-unknown-elf-gcc");
            assert_eq!(t.command[1], "-c");
            assert!(t.command.contains(&format!("-I{}", dir.path().join("inc").display())));
            assert!(t.command.contains(&"-DBAUD=9600".to_string()));
        }
        let link = &res.targets[3];
        assert_eq!(link.command[0], "riscv64-unknown-elf-gcc");
        assert_eq!(link.outputs, [dir.path().join("build/fw.elf")]);
        assert_eq!(res.artifacts, link.outputs);

        let plan = assemble_plan(res.targets).unwrap();
        for i in 0..3 {
            assert!(plan.preds(i).is_empty());
        }
        assert_eq!(plan.preds(3), [0, 1, 2]);
    }

    #[test]
    fn cpp_promotes_linker() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(vec![block(
            dir.path(),
            "v::l::fw::1.0.0",
            &[],
            &[(C, "a.c", ""), (Cpp, "b.cpp", ""), (Asm, "start.S", "")],
        )]);
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        ctx.options = opts(&[("output", "app")]);
        let res = builtin_softcc(&mut ctx).unwrap();
        let argv0: Vec<&str> = res.targets.iter().map(|t| t.command[0].as_str()).collect();
        assert_eq!(argv0, ["gcc", "g++", "gcc", "g++"]);
        assert_eq!(res.targets[3].name, "link-app");
    }

    #[test]
    fn no_sources() {
        let dir = tempfile::tempdir().unwrap();
        let g = graph(vec![block(dir.path(), "v::l::fw::1.0.0", &[], &[(Verilog, "x.v", "")])]);
        let mut ctx = BackendContext::new(&g, dir.path().join("build"));
        assert_eq!(builtin_softcc(&mut ctx).unwrap_err().code(), "E_NO_SOURCES");
    }
}
