// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::target::Target;
use crate::vlnv::is_ident;

/// Validated, acyclic set of targets with explicit and inferred edges.
#[derive(Debug, Clone)]
pub struct TargetGraph {
    targets: Vec<Target>,
    index: HashMap<String, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

/// Builds the target graph. Besides declared `deps`, a target that consumes
/// another target's output depends on it.
pub fn assemble_plan(targets: Vec<Target>) -> Result<TargetGraph> {
    let mut index = HashMap::new();
    for (i, t) in targets.iter().enumerate() {
        if !is_ident(&t.name) {
            return Err(Error::BadIdent {
                text: t.name.clone(),
                ident: t.name.clone(),
            });
        }
        if let Some(prev) = index.insert(t.name.clone(), i) {
            return Err(Error::DupTarget {
                name: t.name.clone(),
                first: format!("target #{prev}"),
                second: format!("target #{i}"),
            });
        }
    }

    let mut producer: HashMap<&PathBuf, usize> = HashMap::new();
    for (i, t) in targets.iter().enumerate() {
        for out in &t.outputs {
            if let Some(prev) = producer.insert(out, i) {
                return Err(Error::DupOutput {
                    path: out.clone(),
                    first: targets[prev].name.clone(),
                    second: t.name.clone(),
                });
            }
        }
    }

    let n = targets.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, t) in targets.iter().enumerate() {
        for dep in &t.deps {
            let &d = index.get(dep).ok_or_else(|| Error::UnknownDep {
                target: t.name.clone(),
                dep: dep.clone(),
            })?;
            preds[i].push(d);
        }
        for input in &t.inputs {
            if let Some(&p) = producer.get(input) {
                preds[i].push(p);
            }
        }
        preds[i].sort_unstable();
        preds[i].dedup();
    }
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(i);
        }
    }

    let graph = TargetGraph {
        targets,
        index,
        preds,
        succs,
    };
    if let Some(cycle) = graph.find_cycle() {
        return Err(Error::CycleTargets { path: cycle });
    }
    Ok(graph)
}

impl TargetGraph {
    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Target> {
        self.index_of(name).map(|i| &self.targets[i])
    }

    /// Direct dependencies of target `i`, ascending.
    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn succs(&self, i: usize) -> &[usize] {
        &self.succs[i]
    }

    /// Marks `goals` and everything they transitively depend on. No goals
    /// selects every target.
    pub fn select(&self, goals: &[String]) -> Result<Vec<bool>> {
        if goals.is_empty() {
            return Ok(vec![true; self.len()]);
        }
        let mut selected = vec![false; self.len()];
        let mut stack = Vec::new();
        for g in goals {
            stack.push(self.index_of(g).ok_or_else(|| Error::UnknownTarget(g.clone()))?);
        }
        while let Some(i) = stack.pop() {
            if !std::mem::replace(&mut selected[i], true) {
                stack.extend(&self.preds[i]);
            }
        }
        Ok(selected)
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // Kahn's algorithm; anything left over sits on or behind a cycle.
        let n = self.len();
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop_front() {
            seen += 1;
            for &s in &self.succs[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if seen == n {
            return None;
        }
        // Walk predecessors among the leftovers until a node repeats.
        let start = (0..n).find(|&i| indeg[i] > 0)?;
        let mut path = vec![start];
        loop {
            let cur = *path.last().unwrap();
            let next = *self.preds[cur].iter().find(|&&p| indeg[p] > 0)?;
            if let Some(pos) = path.iter().position(|&p| p == next) {
                let mut cycle: Vec<usize> = path[pos..].to_vec();
                cycle.push(next);
                // Walked against the edges; report in dependency direction.
                cycle.reverse();
                return Some(cycle.into_iter().map(|i| self.targets[i].name.clone()).collect());
            }
            path.push(next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_edge_from_output_to_input() {
        let plan = assemble_plan(vec![
            Target::new("a", ["cat"]).inputs(["/b/f.v"]),
            Target::new("b", ["gen"]).outputs(["/b/f.v"]),
        ])
        .unwrap();
        assert_eq!(plan.preds(0), [1]);
        assert_eq!(plan.succs(1), [0]);
    }

    #[test]
    fn duplicate_output() {
        let err = assemble_plan(vec![
            Target::new("a", ["cc"]).outputs(["/b/x.o"]),
            Target::new("b", ["cc"]).outputs(["/b/x.o"]),
        ])
        .unwrap_err();
        assert_eq!(err.code(), "E_DUP_OUTPUT");
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        match assemble_plan(vec![Target::new("a", ["x"]).deps(["a"])]).unwrap_err() {
            Error::CycleTargets { path } => assert_eq!(path, ["a", "a"]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn longer_cycle_path() {
        let err = assemble_plan(vec![
            Target::new("a", ["x"]).deps(["c"]),
            Target::new("b", ["x"]).deps(["a"]),
            Target::new("c", ["x"]).deps(["b"]),
            Target::new("d", ["x"]).deps(["a"]),
        ])
        .unwrap_err();
        match err {
            Error::CycleTargets { path } => {
                assert_eq!(path.len(), 4);
                assert_eq!(path.first(), path.last());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn other_plan_errors() {
        let dup = assemble_plan(vec![Target::new("a", ["x"]), Target::new("a", ["y"])]).unwrap_err();
        assert_eq!(dup.code(), "E_DUP_TARGET");
        let unknown = assemble_plan(vec![Target::new("a", ["x"]).deps(["zz"])]).unwrap_err();
        assert_eq!(unknown.code(), "E_UNKNOWN_DEP");
        let bad = assemble_plan(vec![Target::new("a b", ["x"])]).unwrap_err();
        assert_eq!(bad.code(), "E_BAD_IDENT");
    }

    #[test]
    fn goal_selection_pulls_in_dependencies() {
        let plan = assemble_plan(vec![
            Target::new("a", ["x"]),
            Target::new("b", ["x"]).deps(["a"]),
            Target::new("c", ["x"]),
        ])
        .unwrap();
        assert_eq!(plan.select(&["b".into()]).unwrap(), [true, true, false]);
        assert_eq!(plan.select(&[]).unwrap(), [true, true, true]);
        assert_eq!(plan.select(&["q".into()]).unwrap_err().code(), "E_UNKNOWN_TARGET");
    }
}
