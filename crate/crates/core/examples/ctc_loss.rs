//! CTC loss on a small random lattice, checked against brute-force path
//! enumeration, and the prefix scores used during decoding.

use avsr::ctc::{ctc_loss, ctc_prefix_init, LogProbLattice};
use avsr::numerics::{log_sum_exp, seeded_rng, Matrix};

/// Collapse a frame path: merge repeats, then drop blanks.
fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

fn main() -> avsr::error::Result<()> {
    let (frames, labels) = (5, 3);
    let mut rng = seeded_rng(7);
    let lattice = LogProbLattice::from_logits(Matrix::uniform(frames, labels + 1, 2.0, &mut rng), 50.0);
    let blank = lattice.blank();
    let target = [0, 1, 1];

    let loss = ctc_loss(&lattice, &target)?;
    println!("target {target:?}: ln p = {:.12}", loss.log_prob);

    // every path of length T over labels+blank
    let mut paths = Vec::new();
    let total = (labels + 1).pow(frames as u32);
    for code in 0..total {
        let mut c = code;
        let path: Vec<usize> = (0..frames).map(|_| { let k = c % (labels + 1); c /= labels + 1; k }).collect();
        if collapse(&path, blank) == target {
            paths.push((0..frames).map(|t| lattice.at(t, path[t])).sum::<f64>());
        }
    }
    println!("brute force over {} paths: ln p = {:.12}", paths.len(), log_sum_exp(&paths)?);

    // prefix scores: ln P(prefix is a prefix of the output) and ln P(output = prefix)
    let mut state = ctc_prefix_init(&lattice);
    for &k in &target {
        state = state.extend(k, &lattice);
        println!("after {k}: prefix {:.6}, terminated {:.6}", state.prefix_log_prob(), state.terminated_log_prob());
    }
    Ok(())
}
