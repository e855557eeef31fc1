// SPDX-License-Identifier: Apache-2.0

//! Synthetic inputs shared by the benchmarks.

use socbuild_core::{IpBlock, Registry, Target, Vlnv, VlnvRef};

/// `layers` layers of `width` blocks; every block links the whole layer
/// below it, so the graph is dense in shared dependencies.
pub fn layered_registry(layers: usize, width: usize) -> (Registry, VlnvRef) {
    let id = |l: usize, w: usize| Vlnv::parse(&format!("bench::l{l}::n{w}::1.0.0")).unwrap();
    let mut reg = Registry::new();
    for l in 0..layers {
        for w in 0..width {
            let mut b = IpBlock::new(id(l, w));
            if l > 0 {
                for below in 0..width {
                    b.link(id(l - 1, below).to_ref());
                }
            }
            reg.insert(b).unwrap();
        }
    }
    let mut top = IpBlock::new(Vlnv::parse("bench::top::top::1.0.0").unwrap());
    for w in 0..width {
        top.link(id(layers - 1, w).to_ref());
    }
    let root = top.id.to_ref();
    reg.insert(top).unwrap();
    (reg, root)
}

/// A chain of `n` targets where each consumes its predecessor's output.
pub fn target_chain(n: usize) -> Vec<Target> {
    (0..n)
        .map(|i| {
            let mut t = Target::new(format!("t{i}"), ["true"]).outputs([format!("out/{i}")]);
            if i > 0 {
                t = t.inputs([format!("out/{}", i - 1)]);
            }
            t
        })
        .collect()
}

/// Roughly `bytes` of SystemVerilog-looking text.
pub fn sv_text(bytes: usize) -> Vec<u8> {
    let line = b"  logic [7:0] data_logic; // logic analyser tap\n";
    line.iter().copied().cycle().take(bytes).collect()
}
