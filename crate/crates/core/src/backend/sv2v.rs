// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{sanitize, BackendContext, BackendResult};
use crate::error::Result;
use crate::ip::SourceLanguage;
use crate::target::Target;
use crate::vlnv::Vlnv;

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Replaces every whole-word `logic` with `wire`; all other bytes pass
/// through unchanged. Word characters are `[A-Za-z0-9_]`.
pub fn sv2v_stub_transform(input: &[u8]) -> Vec<u8> {
    const FROM: &[u8] = b"logic";
    let mut out = Vec::with_capacity(input.len());
    let mut i = 0;
    while i < input.len() {
        if input[i..].starts_with(FROM)
            && (i == 0 || !is_word(input[i - 1]))
            && input.get(i + FROM.len()).is_none_or(|&b| !is_word(b))
        {
            out.extend_from_slice(b"wire");
            i += FROM.len();
        } else {
            out.push(input[i]);
            i += 1;
        }
    }
    out
}

/// Converts every SystemVerilog source to `<build_dir>/sv2v/<v>_<l>_<n>/<stem>.v`
/// and swaps the generated files into the overlay's Verilog filesets.
pub fn builtin_sv2v(ctx: &mut BackendContext<'_>) -> Result<BackendResult> {
    let sv = ctx.sources(&[SourceLanguage::SystemVerilog])?;
    let mut per_ip: BTreeMap<Vlnv, Vec<PathBuf>> = BTreeMap::new();
    let mut result = BackendResult::default();
    for entry in sv {
        let flat = entry.ip.flat_name();
        let stem = entry
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let out = ctx.build_dir.join("sv2v").join(&flat).join(format!("{stem}.v"));
        let (src_arg, out_arg) = (entry.path.display().to_string(), out.display().to_string());
        let target = Target::new(
            format!("sv2v-{flat}-{}", sanitize(&stem)),
            ctx.helper_command(&["sv2v", &src_arg, &out_arg]),
        )
        .inputs([entry.path.clone()])
        .outputs([out.clone()]);
        result.targets.push(target);
        result.artifacts.push(out.clone());
        per_ip.entry(entry.ip).or_default().push(out);
    }
    for (id, generated) in per_ip {
        let mut verilog = ctx.fileset(&id, SourceLanguage::Verilog).to_vec();
        for g in generated {
            ctx.mark_generated(&g);
            verilog.push(g);
        }
        ctx.set_fileset(&id, SourceLanguage::Verilog, verilog);
        ctx.set_fileset(&id, SourceLanguage::SystemVerilog, Vec::new());
    }
    Ok(result)
}
