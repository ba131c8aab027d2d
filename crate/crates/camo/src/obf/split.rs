//! Basic-block splitting: cuts long blocks into chains of short ones joined
//! by unconditional branches, breaking recognizable straight-line patterns.

use super::{ObfConfig, PassCounters, PassOutcome};
use crate::ir::*;
use crate::rng::SplitMix64;

/// Splits every block whose non-phi body exceeds `cfg.split_chunk`
/// instructions into chained blocks of at most that many instructions.
///
/// Phis stay on the original head, which keeps its label, so edges into the
/// block are untouched. The cut positions are fixed (maximal chunks); the
/// RNG parameter is part of the uniform pass interface.
pub fn split_blocks(
    f: &IrFunction,
    cfg: &ObfConfig,
    _rng: &mut SplitMix64,
) -> Result<PassOutcome, ValidationError> {
    let violations = validate_function(f);
    if !violations.is_empty() {
        return Err(ValidationError { violations });
    }
    let mut out = f.clone();
    let mut fresh = FreshNames::for_function(&out);
    let mut stats = PassCounters {
        blocks_processed: out.blocks.len() as u64,
        ..Default::default()
    };

    // After a split, the edge into each successor originates from the last
    // chunk; phis over there must be renamed once all blocks are rebuilt.
    let mut phi_renames: Vec<(String, String, Vec<String>)> = Vec::new();

    let mut blocks: Vec<BasicBlock> = Vec::with_capacity(out.blocks.len());
    for mut block in out.blocks.drain(..) {
        if block.body.len() <= cfg.split_chunk {
            blocks.push(block);
            continue;
        }
        stats.blocks_split += 1;

        let chunks: Vec<Vec<Instruction>> = {
            let mut cs = Vec::new();
            let mut body = std::mem::take(&mut block.body);
            while body.len() > cfg.split_chunk {
                let rest = body.split_off(cfg.split_chunk);
                cs.push(body);
                body = rest;
            }
            cs.push(body);
            cs
        };

        let labels: Vec<String> = std::iter::once(block.label.clone())
            .chain((1..chunks.len()).map(|_| fresh.fresh(&format!("{}.split", block.label))))
            .collect();
        let term = block.term;
        let phis = block.phis;
        phi_renames.push((
            block.label.clone(),
            labels.last().unwrap().clone(),
            term.successors().into_iter().map(str::to_string).collect(),
        ));
        for (i, chunk) in chunks.into_iter().enumerate() {
            let is_last = i == labels.len() - 1;
            blocks.push(BasicBlock {
                label: labels[i].clone(),
                phis: if i == 0 { phis.clone() } else { vec![] },
                body: chunk,
                term: if is_last {
                    term.clone()
                } else {
                    Terminator::Br(labels[i + 1].clone())
                },
            });
        }
    }
    out.blocks = blocks;

    for (from, to, successors) in phi_renames {
        for succ in successors {
            let block = out
                .blocks
                .iter_mut()
                .find(|b| b.label == succ)
                .expect("validated successor");
            for phi in &mut block.phis {
                for (_, label) in &mut phi.incomings {
                    if *label == from {
                        *label = to.clone();
                    }
                }
            }
        }
    }

    debug_assert_eq!(validate_function(&out), vec![]);
    Ok(PassOutcome {
        function: out,
        stats,
        junk_labels: vec![],
    })
}
