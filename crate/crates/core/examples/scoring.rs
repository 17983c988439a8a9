//! Word and character error rates with their substitution, deletion and
//! insertion counts.

use avsr::harness::{char_errors, corpus_error_rates, word_errors};

fn main() -> avsr::error::Result<()> {
    let pairs = [("bad cafe", "bad cafe"), ("ace bed", "ace bad"), ("dig jab", "dig"), ("hi", "hi hi")];
    for (r, h) in pairs {
        let w = word_errors(r, h)?;
        let c = char_errors(r, h)?;
        println!(
            "{r:>8} | {h:<8}  WER {:.3} (S {} D {} I {})  CER {:.3} (S {} D {} I {})",
            w.rate(), w.substitutions, w.deletions, w.insertions,
            c.rate(), c.substitutions, c.deletions, c.insertions
        );
    }
    // corpus rates pool the counts rather than averaging per-utterance rates
    let (w, c) = corpus_error_rates(pairs)?;
    println!("corpus: WER {:.4} over {} words, CER {:.4} over {} symbols", w.rate(), w.ref_len, c.rate(), c.ref_len);
    Ok(())
}
