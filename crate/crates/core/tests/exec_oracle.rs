// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use socbuild_core::exec::{assemble_plan, execute, ExecOptions, TargetStatus};
use socbuild_core::Target;

/// Target `i` concatenates its own source with the outputs of the targets
/// it consumes (`adj[i][j]`, `j < i`).
fn targets(dir: &Path, adj: &[Vec<bool>]) -> Vec<Target> {
    let src = |i: usize| dir.join(format!("src{i}.txt"));
    let out = |i: usize| dir.join(format!("out/t{i}.txt"));
    adj.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut inputs: Vec<PathBuf> = vec![src(i)];
            inputs.extend((0..i).filter(|&j| row[j]).map(out));
            let files: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
            let script = format!("cat {} > {}", files.join(" "), out(i).display());
            Target::new(format!("t{i}"), ["sh", "-c", &script])
                .inputs(inputs)
                .outputs([out(i)])
        })
        .collect()
}

/// `start` plus everything that transitively consumes it.
fn dependents(adj: &[Vec<bool>], start: usize) -> BTreeSet<String> {
    let mut hit = BTreeSet::from([start]);
    for (i, row) in adj.iter().enumerate().skip(start + 1) {
        if (0..i).any(|j| row[j] && hit.contains(&j)) {
            hit.insert(i);
        }
    }
    hit.into_iter().map(|i| format!("t{i}")).collect()
}

fn ran(report: &socbuild_core::exec::RunReport) -> BTreeSet<String> {
    report
        .names(TargetStatus::RanOk)
        .into_iter()
        .map(String::from)
        .collect()
}

fn dag(max: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1..=max).prop_flat_map(|n| {
        (0..n)
            .map(|i| proptest::collection::vec(any::<bool>(), i))
            .collect::<Vec<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn touching_one_leaf_reruns_exactly_its_dependents(
        adj in dag(8),
        pick in any::<prop::sample::Index>(),
        jobs in 1usize..4,
    ) {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..adj.len() {
            std::fs::write(dir.path().join(format!("src{i}.txt")), format!("v{i}\n")).unwrap();
        }
        let plan = assemble_plan(targets(dir.path(), &adj)).unwrap();
        let opts = ExecOptions::new(dir.path().join("build")).jobs(jobs);

        let first = execute(&plan, &[], &opts).unwrap();
        prop_assert_eq!(first.count(TargetStatus::RanOk), adj.len());
        // Every edge is respected in the trace.
        for (i, t) in plan.targets().iter().enumerate() {
            let o = first.outcome(&t.name).unwrap();
            for &p in plan.preds(i) {
                let dep = first.outcome(&plan.targets()[p].name).unwrap();
                prop_assert!(o.started.unwrap() >= dep.finished.unwrap());
            }
        }

        let null = execute(&plan, &[], &opts).unwrap();
        prop_assert_eq!(null.spawned, 0);

        let k = pick.index(adj.len());
        std::fs::write(dir.path().join(format!("src{k}.txt")), format!("w{k}\n")).unwrap();
        let third = execute(&plan, &[], &opts).unwrap();
        prop_assert_eq!(ran(&third), dependents(&adj, k));
        prop_assert_eq!(third.spawned, third.count(TargetStatus::RanOk));
    }

    #[test]
    fn serial_order_is_topological_and_repeatable(adj in dag(8)) {
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            for i in 0..adj.len() {
                std::fs::write(dir.path().join(format!("src{i}.txt")), "x").unwrap();
            }
            let plan = assemble_plan(targets(dir.path(), &adj)).unwrap();
            let report = execute(&plan, &[], &ExecOptions::new(dir.path().join("build"))).unwrap();
            (plan, report.completion_order)
        };
        let (plan, order) = run();
        let pos = |n: &str| order.iter().position(|x| x == n).unwrap();
        for (i, t) in plan.targets().iter().enumerate() {
            for &p in plan.preds(i) {
                prop_assert!(pos(&plan.targets()[p].name) < pos(&t.name));
            }
        }
        prop_assert_eq!(order, run().1);
    }
}

#[test]
fn early_cutoff_skips_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("in.txt"), "abc").unwrap();
    let len = d.join("len.txt");
    let fin = d.join("final.txt");
    let plan = assemble_plan(vec![
        Target::new(
            "measure",
            [
                "sh",
                "-c",
                &format!("wc -c < {} > {}", d.join("in.txt").display(), len.display()),
            ],
        )
        .inputs([d.join("in.txt")])
        .outputs([&len]),
        Target::new(
            "consume",
            ["sh", "-c", &format!("cp {} {}", len.display(), fin.display())],
        )
        .inputs([&len])
        .outputs([&fin]),
    ])
    .unwrap();
    let opts = ExecOptions::new(d.join("build"));
    assert_eq!(execute(&plan, &[], &opts).unwrap().spawned, 2);

    std::fs::write(d.join("in.txt"), "xyz").unwrap();
    let report = execute(&plan, &[], &opts).unwrap();
    assert_eq!(report.names(TargetStatus::RanOk), ["measure"]);
    assert_eq!(report.names(TargetStatus::SkippedUpToDate), ["consume"]);

    // A rewrite of the intermediate with identical bytes changes nothing.
    std::fs::write(&len, std::fs::read(&len).unwrap()).unwrap();
    assert_eq!(execute(&plan, &[], &opts).unwrap().spawned, 0);
}
