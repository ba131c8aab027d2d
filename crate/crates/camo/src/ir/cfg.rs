//! Control-flow graph construction and dominance analysis.

use indexmap::IndexMap;
use std::collections::HashMap;

use super::types::IrFunction;
use super::validate::Violation;

/// Successor/predecessor maps derived from block terminators. Keys follow
/// block order; predecessor lists follow the predecessors' block order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    successors: IndexMap<String, Vec<String>>,
    predecessors: IndexMap<String, Vec<String>>,
}

impl Cfg {
    pub fn successors(&self, label: &str) -> &[String] {
        self.successors.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn predecessors(&self, label: &str) -> &[String] {
        self.predecessors
            .get(label)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Block labels in function order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.successors.keys().map(String::as_str)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.successors.contains_key(label)
    }
}

/// Builds the CFG of a defined function.
///
/// Fails with [`Violation::UndefinedLabel`] if a terminator names a label
/// that does not exist; duplicate successor edges (e.g. `br i1 %c, label %a,
/// label %a`) are kept, matching the phi-per-edge view of LLVM.
pub fn build_cfg(f: &IrFunction) -> Result<Cfg, Violation> {
    let mut successors: IndexMap<String, Vec<String>> = IndexMap::new();
    let mut predecessors: IndexMap<String, Vec<String>> = IndexMap::new();
    for b in &f.blocks {
        successors.insert(b.label.clone(), Vec::new());
        predecessors.insert(b.label.clone(), Vec::new());
    }
    for b in &f.blocks {
        for succ in b.term.successors() {
            if !successors.contains_key(succ) {
                return Err(Violation::UndefinedLabel {
                    function: f.name.clone(),
                    block: b.label.clone(),
                    label: succ.to_string(),
                });
            }
            successors[&b.label].push(succ.to_string());
        }
    }
    // Transpose in block order so predecessor lists are deterministic.
    for b in &f.blocks {
        for succ in &successors[&b.label].clone() {
            predecessors[succ].push(b.label.clone());
        }
    }
    Ok(Cfg {
        successors,
        predecessors,
    })
}

/// Immediate-dominator map computed with the iterative algorithm of
/// Cooper/Harvey/Kennedy over a reverse postorder. Blocks unreachable from
/// the entry have no entry in the map.
#[derive(Debug)]
pub struct Dominators {
    idom: HashMap<String, String>,
    /// Reverse-postorder position of each reachable block.
    order: HashMap<String, usize>,
}

impl Dominators {
    pub fn is_reachable(&self, label: &str) -> bool {
        self.order.contains_key(label)
    }

    /// True if `a` dominates `b` (reflexively).
    pub fn dominates(&self, a: &str, b: &str) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.idom.get(cur) {
                Some(parent) if parent != cur => cur = parent,
                _ => return false,
            }
        }
    }
}

pub fn compute_dominators(f: &IrFunction, cfg: &Cfg) -> Dominators {
    let Some(entry) = f.blocks.first() else {
        return Dominators {
            idom: HashMap::new(),
            order: HashMap::new(),
        };
    };
    let entry = entry.label.clone();

    // Depth-first postorder from the entry; successor ties broken by the
    // terminator's textual order.
    let mut postorder: Vec<String> = Vec::new();
    let mut visited: HashMap<String, bool> = HashMap::new();
    let mut stack: Vec<(String, usize)> = vec![(entry.clone(), 0)];
    visited.insert(entry.clone(), true);
    while let Some((label, next_child)) = stack.pop() {
        let succs = cfg.successors(&label);
        if next_child < succs.len() {
            let child = succs[next_child].clone();
            stack.push((label, next_child + 1));
            if !visited.get(&child).copied().unwrap_or(false) {
                visited.insert(child.clone(), true);
                stack.push((child, 0));
            }
        } else {
            postorder.push(label);
        }
    }

    let rpo: Vec<String> = postorder.iter().rev().cloned().collect();
    let order: HashMap<String, usize> = rpo
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();

    let mut idom: HashMap<String, String> = HashMap::new();
    idom.insert(entry.clone(), entry.clone());
    let mut changed = true;
    while changed {
        changed = false;
        for label in &rpo {
            if *label == entry {
                continue;
            }
            let mut new_idom: Option<String> = None;
            for pred in cfg.predecessors(label) {
                if !idom.contains_key(pred) {
                    continue; // unreachable or not yet processed
                }
                new_idom = Some(match new_idom {
                    None => pred.clone(),
                    Some(cur) => intersect(&idom, &order, pred, &cur),
                });
            }
            if let Some(n) = new_idom {
                if idom.get(label) != Some(&n) {
                    idom.insert(label.clone(), n);
                    changed = true;
                }
            }
        }
    }

    Dominators { idom, order }
}

fn intersect(
    idom: &HashMap<String, String>,
    order: &HashMap<String, usize>,
    a: &str,
    b: &str,
) -> String {
    let mut a = a.to_string();
    let mut b = b.to_string();
    while a != b {
        while order[&a] > order[&b] {
            a = idom[&a].clone();
        }
        while order[&b] > order[&a] {
            b = idom[&b].clone();
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Terminator;
    use crate::text::parse_module;

    fn fn_of(src: &str) -> IrFunction {
        parse_module(src).unwrap().functions[0].clone()
    }

    #[test]
    fn single_block_cfg() {
        let f = fn_of(
            "define i32 @calculate(i32 %a, i32 %b) {\nentry:\n  %sum = add i32 %a, %b\n  ret i32 %sum\n}\n",
        );
        let cfg = build_cfg(&f).unwrap();
        assert_eq!(cfg.successors("entry"), &[] as &[String]);
        assert_eq!(cfg.labels().collect::<Vec<_>>(), vec!["entry"]);
    }

    #[test]
    fn cond_br_successors() {
        let f = fn_of(
            "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %a, label %b\na:\n  ret i32 1\nb:\n  ret i32 2\n}\n",
        );
        let cfg = build_cfg(&f).unwrap();
        assert_eq!(cfg.successors("entry"), &["a".to_string(), "b".to_string()]);
        assert_eq!(cfg.predecessors("a"), &["entry".to_string()]);
    }

    #[test]
    fn diamond_join_predecessors() {
        // if/else diamond: join's predecessors are both arms.
        let f = fn_of(
            "define i32 @f(i1 %c) {\nentry:\n  br i1 %c, label %then, label %else\nthen:\n  br label %join\nelse:\n  br label %join\njoin:\n  ret i32 0\n}\n",
        );
        let cfg = build_cfg(&f).unwrap();
        assert_eq!(
            cfg.predecessors("join"),
            &["then".to_string(), "else".to_string()]
        );
        let dom = compute_dominators(&f, &cfg);
        assert!(dom.dominates("entry", "join"));
        assert!(!dom.dominates("then", "join"));
        assert!(dom.dominates("join", "join"));
    }

    #[test]
    fn undefined_label_is_reported() {
        let f = IrFunction {
            name: "f".into(),
            ret: crate::ir::IrType::Void,
            params: vec![],
            variadic: false,
            blocks: vec![crate::ir::BasicBlock::new(
                "entry",
                Terminator::Br("nowhere".into()),
            )],
            is_declaration: false,
        };
        assert!(matches!(
            build_cfg(&f),
            Err(Violation::UndefinedLabel { .. })
        ));
    }

    #[test]
    fn loop_dominance() {
        let f = fn_of(
            "define i32 @f(i32 %n) {\nentry:\n  br label %head\nhead:\n  %i = phi i32 [ %n, %entry ], [ %dec, %body ]\n  %c = icmp sgt i32 %i, 0\n  br i1 %c, label %body, label %exit\nbody:\n  %dec = sub i32 %i, 1\n  br label %head\nexit:\n  ret i32 0\n}\n",
        );
        let cfg = build_cfg(&f).unwrap();
        let dom = compute_dominators(&f, &cfg);
        assert!(dom.dominates("head", "body"));
        assert!(dom.dominates("head", "exit"));
        assert!(!dom.dominates("body", "exit"));
    }
}
