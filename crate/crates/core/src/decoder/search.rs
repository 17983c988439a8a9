use std::cmp::Ordering;

use crate::ctc::{ctc_prefix_init, CtcPrefixState, LogProbLattice};
use crate::error::{Error, Result};
use crate::models::{AttentionMemory, EncoderStates, HybridModel, RnnLm};

use super::{combine_scores, BeamConfig, FusionConfig, FusionMode, Hypothesis};

/// One modality's decoding inputs: the encoder pass, its CTC lattice, the
/// model that produced them and an optional LM.
#[derive(Clone, Copy, Debug)]
pub struct Stream<'a> {
    pub model: &'a HybridModel,
    pub states: &'a EncoderStates,
    pub lattice: &'a LogProbLattice,
    pub lm: Option<&'a RnnLm>,
    pub cfg: &'a BeamConfig,
}

/// Component scores of a finished hypothesis under one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamScores {
    pub weight: f64,
    pub ctc: f64,
    pub att: f64,
    pub lm: f64,
    pub joint: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedHypothesis {
    /// Output labels, without the terminating eos.
    pub labels: Vec<usize>,
    pub score: f64,
    /// One entry per stream that contributed (non-zero weight).
    pub streams: Vec<StreamScores>,
}

struct Active<'a> {
    stream: Stream<'a>,
    mem: AttentionMemory,
    weight: f64,
    use_lm: bool,
}

struct Node {
    prefix: Vec<usize>,
    hyps: Vec<Hypothesis>,
}

struct Candidate {
    parent: usize,
    label: Option<usize>,
    score: f64,
    parts: Vec<(f64, f64, f64)>,
    ctc_states: Vec<Option<CtcPrefixState>>,
}

fn check_stream(s: &Stream<'_>) -> Result<()> {
    s.cfg.validate()?;
    if s.states.frames() == 0 || s.lattice.frames() == 0 {
        return Err(Error::Usage("cannot decode an empty encoder output".into()));
    }
    if s.states.frames() != s.lattice.frames() {
        return Err(Error::Usage(format!(
            "encoder has {} frames but the CTC lattice has {}",
            s.states.frames(),
            s.lattice.frames()
        )));
    }
    if s.lattice.num_labels() != s.model.alphabet.len() {
        return Err(Error::Usage("CTC lattice width does not match the model alphabet".into()));
    }
    if let Some(lm) = s.lm {
        if lm.num_labels() != s.model.alphabet.len() {
            return Err(Error::Usage("language model and recognizer alphabets differ".into()));
        }
    }
    Ok(())
}

fn activate<'a>(s: Stream<'a>, weight: f64) -> Result<Active<'a>> {
    check_stream(&s)?;
    let mem = s.model.decoder.prepare(s.states)?;
    let use_lm = s.lm.is_some() && s.cfg.lm_weight != 0.0;
    Ok(Active { stream: s, mem, weight, use_lm })
}

fn root(a: &Active<'_>) -> Hypothesis {
    Hypothesis {
        prefix: Vec::new(),
        logp_ctc: 0.0,
        logp_att: 0.0,
        logp_lm: 0.0,
        ctc_state: ctc_prefix_init(a.stream.lattice),
        att_state: a.stream.model.decoder.initial_state(a.stream.states.frames()),
        lm_state: a.stream.lm.filter(|_| a.use_lm).map(|lm| lm.initial_state()),
    }
}

/// Score descending, then candidate sequence ascending (eos sorts after every label).
fn rank(a: (f64, &[usize], Option<usize>), b: (f64, &[usize], Option<usize>)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| {
        let ka = a.1.iter().copied().chain([a.2.unwrap_or(usize::MAX)]);
        let kb = b.1.iter().copied().chain([b.2.unwrap_or(usize::MAX)]);
        ka.cmp(kb)
    })
}

fn finish(streams: &[Active<'_>], prefix: Vec<usize>, parts: &[(f64, f64, f64)], score: f64) -> RankedHypothesis {
    let scores = streams
        .iter()
        .zip(parts)
        .map(|(a, &(ctc, att, lm))| StreamScores {
            weight: a.weight,
            ctc,
            att,
            lm,
            joint: combine_scores(a.stream.cfg, ctc, att, lm),
        })
        .collect();
    RankedHypothesis { labels: prefix, score, streams: scores }
}

fn fused(streams: &[Active<'_>], parts: &[(f64, f64, f64)]) -> f64 {
    streams
        .iter()
        .zip(parts)
        .map(|(a, &(c, t, l))| {
            a.weight * combine_scores(a.stream.cfg, c, t, l)
        })
        .sum()
}

/// Label-synchronous beam over any number of weighted streams.
fn search(streams: &[Active<'_>], width: usize, max_len: usize) -> Result<Vec<RankedHypothesis>> {
    let alphabet = &streams[0].stream.model.alphabet;
    let n = alphabet.len();
    let sos = alphabet.sos_id();
    let mut live = vec![Node { prefix: Vec::new(), hyps: streams.iter().map(root).collect() }];
    let mut finished: Vec<RankedHypothesis> = Vec::new();
    for step in 0..=max_len {
        let mut next_states = Vec::with_capacity(live.len());
        let mut candidates: Vec<Candidate> = Vec::new();
        for (pi, node) in live.iter().enumerate() {
            let prev = node.prefix.last().copied().unwrap_or(sos);
            let mut per_stream = Vec::with_capacity(streams.len());
            for (a, h) in streams.iter().zip(&node.hyps) {
                let (att_state, att_logp) = a.stream.model.decoder.step(&h.att_state, prev, &a.mem)?;
                let lm = match (a.stream.lm, &h.lm_state) {
                    (Some(lm), Some(state)) => Some(lm.lm_step(state, prev)?),
                    _ => None,
                };
                per_stream.push((att_state, att_logp, lm));
            }
            for c in 0..=n {
                let label = (c < n).then_some(c);
                if step == max_len && label.is_some() {
                    continue;
                }
                let mut parts = Vec::with_capacity(streams.len());
                let mut ctc_states = Vec::with_capacity(streams.len());
                for ((a, h), (_, att_logp, lm)) in streams.iter().zip(&node.hyps).zip(&per_stream) {
                    let (ctc, st) = match label {
                        Some(l) => {
                            let st = h.ctc_state.extend(l, a.stream.lattice);
                            (st.prefix_log_prob(), Some(st))
                        }
                        None => (h.ctc_state.terminated_log_prob(), None),
                    };
                    let lm_score = match lm {
                        Some((_, lp)) => h.logp_lm + lp[c],
                        None => h.logp_lm,
                    };
                    parts.push((ctc, h.logp_att + att_logp[c], lm_score));
                    ctc_states.push(st);
                }
                let score = fused(streams, &parts);
                candidates.push(Candidate { parent: pi, label, score, parts, ctc_states });
            }
            next_states.push(per_stream);
        }
        candidates.sort_by(|x, y| {
            rank(
                (x.score, &live[x.parent].prefix, x.label),
                (y.score, &live[y.parent].prefix, y.label),
            )
        });
        candidates.truncate(width);
        let mut next_live = Vec::new();
        for cand in candidates {
            let parent = &live[cand.parent];
            match cand.label {
                None => finished.push(finish(streams, parent.prefix.clone(), &cand.parts, cand.score)),
                Some(l) => {
                    let mut prefix = parent.prefix.clone();
                    prefix.push(l);
                    let hyps = streams
                        .iter()
                        .enumerate()
                        .map(|(s, _)| {
                            let (att_state, _, lm) = &next_states[cand.parent][s];
                            let (ctc, att, lmv) = cand.parts[s];
                            Hypothesis {
                                prefix: prefix.clone(),
                                logp_ctc: ctc,
                                logp_att: att,
                                logp_lm: lmv,
                                ctc_state: cand.ctc_states[s].clone().expect("label extension has a CTC state"),
                                att_state: att_state.clone(),
                                lm_state: lm.as_ref().map(|(st, _)| st.clone()),
                            }
                        })
                        .collect();
                    next_live.push((cand.score, Node { prefix, hyps }));
                }
            }
        }
        let best_finished = finished.iter().map(|f| f.score).fold(f64::NEG_INFINITY, f64::max);
        let best_live = next_live.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        live = next_live.into_iter().map(|(_, n)| n).collect();
        if live.is_empty() || (!finished.is_empty() && best_finished >= best_live) {
            break;
        }
    }
    finished.sort_by(|a, b| rank((a.score, &a.labels, None), (b.score, &b.labels, None)));
    Ok(finished)
}

/// Joint CTC/attention(/LM) beam search over one stream. Hypotheses are
/// returned best first.
pub fn beam_search(stream: &Stream<'_>) -> Result<Vec<RankedHypothesis>> {
    let a = activate(*stream, 1.0)?;
    let width = stream.cfg.beam_width;
    let max_len = stream.cfg.max_len_for(stream.states.frames());
    search(std::slice::from_ref(&a), width, max_len)
}

/// Late fusion of an audio and a visual stream with audio weight `γ`. Beam
/// width and length cap come from the audio stream's config.
pub fn late_fusion_search(audio: &Stream<'_>, visual: &Stream<'_>, fusion: &FusionConfig) -> Result<Vec<RankedHypothesis>> {
    if audio.model.alphabet != visual.model.alphabet {
        return Err(Error::Usage("audio and visual models use different alphabets".into()));
    }
    let gamma = fusion.gamma;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let mut active = Vec::with_capacity(2);
    if gamma != 0.0 {
        active.push(activate(*audio, gamma)?);
    }
    if gamma != 1.0 {
        active.push(activate(*visual, 1.0 - gamma)?);
    }
    let frames = audio.states.frames().max(visual.states.frames());
    let width = audio.cfg.beam_width;
    let max_len = audio.cfg.max_len_for(frames);
    match fusion.mode {
        FusionMode::Late => search(&active, width, max_len),
        FusionMode::LateRescore => rescore(&active, width, max_len),
        FusionMode::Early => Err(Error::Usage("early fusion is an encoder topology, not a search mode".into())),
    }
}

fn rescore(active: &[Active<'_>], width: usize, max_len: usize) -> Result<Vec<RankedHypothesis>> {
    let mut pool: Vec<Vec<usize>> = Vec::new();
    for a in active {
        let solo = Active { stream: a.stream, mem: a.mem.clone(), weight: 1.0, use_lm: a.use_lm };
        for h in search(std::slice::from_ref(&solo), width, max_len)? {
            if !pool.contains(&h.labels) {
                pool.push(h.labels);
            }
        }
    }
    let mut out = Vec::with_capacity(pool.len());
    for labels in pool {
        let parts = active
            .iter()
            .map(|a| forced_parts(a, &labels))
            .collect::<Result<Vec<_>>>()?;
        let score = fused(active, &parts);
        out.push(finish(active, labels, &parts, score));
    }
    out.sort_by(|a, b| rank((a.score, &a.labels, None), (b.score, &b.labels, None)));
    Ok(out)
}

fn forced_parts(a: &Active<'_>, labels: &[usize]) -> Result<(f64, f64, f64)> {
    let s = &a.stream;
    let n = s.model.alphabet.len();
    let mut ctc = ctc_prefix_init(s.lattice);
    let mut att_state = s.model.decoder.initial_state(s.states.frames());
    let mut lm_state = s.lm.filter(|_| a.use_lm).map(|lm| lm.initial_state());
    let (mut att, mut lm_total) = (0.0, 0.0);
    let mut prev = s.model.alphabet.sos_id();
    for i in 0..=labels.len() {
        let slot = labels.get(i).copied().unwrap_or(n);
        let (next, logp) = s.model.decoder.step(&att_state, prev, &a.mem)?;
        att += logp[slot];
        att_state = next;
        if let (Some(lm), Some(st)) = (s.lm, lm_state.as_ref()) {
            let (next, lp) = lm.lm_step(st, prev)?;
            lm_total += lp[slot];
            lm_state = Some(next);
        }
        if let Some(&l) = labels.get(i) {
            ctc = ctc.extend(l, s.lattice);
            prev = l;
        }
    }
    Ok((ctc.terminated_log_prob(), att, lm_total))
}

/// Scores a complete label sequence under one stream exactly as the beam would.
pub fn sequence_scores(stream: &Stream<'_>, labels: &[usize]) -> Result<StreamScores> {
    let a = activate(*stream, 1.0)?;
    let (ctc, att, lm) = forced_parts(&a, labels)?;
    Ok(StreamScores { weight: 1.0, ctc, att, lm, joint: combine_scores(stream.cfg, ctc, att, lm) })
}

/// Argmax chain of the attention decoder alone, stopping at eos or `max_len` labels.
pub fn greedy_attention(model: &HybridModel, states: &EncoderStates, max_len: usize) -> Result<Vec<usize>> {
    let mem = model.decoder.prepare(states)?;
    let n = model.alphabet.len();
    let mut state = model.decoder.initial_state(states.frames());
    let mut prev = model.alphabet.sos_id();
    let mut out = Vec::new();
    while out.len() < max_len {
        let (next, logp) = model.decoder.step(&state, prev, &mem)?;
        let best = logp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty distribution");
        if best == n {
            break;
        }
        out.push(best);
        prev = best;
        state = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSequence, StreamKind};
    use crate::models::{Alphabet, Modality, ModelConfig, ModelInput, Params};
    use crate::numerics::{seeded_rng, Matrix};

    struct Fixture {
        model: HybridModel,
        states: EncoderStates,
        lattice: LogProbLattice,
    }

    fn fixture(labels: &str, frames: usize, modality: Modality, seed: u64) -> Fixture {
        let cfg = ModelConfig {
            audio_dim: 4,
            visual_dim: 4,
            encoder_hidden: 4,
            encoder_layers: 1,
            embed: 4,
            decoder_hidden: 6,
            attention: 4,
            conv_channels: 2,
            conv_width: 3,
            seed,
            ..ModelConfig::new(modality)
        };
        let mut model = HybridModel::new(Alphabet::new(labels.chars()).unwrap(), cfg).unwrap();
        // Sharpen the near-uniform initial distributions so instances are not all ties.
        let m = model.clone();
        model.add_scaled(19.0, &m);
        let kind = if modality == Modality::Visual { StreamKind::Visual } else { StreamKind::Audio };
        let x = FeatureSequence::new(Matrix::uniform(frames, 4, 1.0, &mut seeded_rng(seed + 1000)), 50.0, kind).unwrap();
        let (states, lattice) = model.infer(ModelInput::Single(&x)).unwrap();
        Fixture { model, states, lattice }
    }

    fn stream<'a>(f: &'a Fixture, lm: Option<&'a RnnLm>, cfg: &'a BeamConfig) -> Stream<'a> {
        Stream { model: &f.model, states: &f.states, lattice: &f.lattice, lm, cfg }
    }

    /// CTC sequence probabilities by summing over every frame-level path.
    fn path_sums(lattice: &LogProbLattice) -> Vec<(Vec<usize>, f64)> {
        let (t_max, k) = (lattice.frames(), lattice.num_labels() + 1);
        let blank = lattice.blank();
        let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
        for code in 0..k.pow(t_max as u32) {
            let (mut c, mut p, mut seq, mut last) = (code, 0.0, Vec::new(), blank);
            for t in 0..t_max {
                let s = c % k;
                c /= k;
                p += lattice.at(t, s);
                if s != blank && s != last {
                    seq.push(s);
                }
                last = s;
            }
            match out.iter_mut().find(|(y, _)| *y == seq) {
                Some(e) => e.1 = (e.1.exp() + p.exp()).ln(),
                None => out.push((seq, p)),
            }
        }
        out
    }

    fn exhaustive(labels: usize, max_len: usize) -> usize {
        (labels + 1).pow(max_len as u32)
    }

    #[test]
    fn pure_ctc_exhaustive_beam_is_the_ctc_argmax() {
        for seed in 0..20 {
            let frames = 2 + (seed as usize % 3);
            let f = fixture("ab", frames, Modality::Audio, seed);
            let cfg = BeamConfig {
                ctc_weight: 1.0,
                lm_weight: 0.0,
                beam_width: exhaustive(2, frames),
                max_output_len: Some(frames),
                ..BeamConfig::default()
            };
            let best = &beam_search(&stream(&f, None, &cfg)).unwrap()[0];
            let oracle = path_sums(&f.lattice);
            let (y, p) = oracle.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            assert_eq!(&best.labels, y, "seed {seed}");
            assert!((best.score - p).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_attention_width_one_is_greedy() {
        for seed in 0..20 {
            let f = fixture("abc", 12, Modality::Audio, seed);
            let cfg = BeamConfig { ctc_weight: 0.0, lm_weight: 0.0, beam_width: 1, ..BeamConfig::default() };
            let best = &beam_search(&stream(&f, None, &cfg)).unwrap()[0];
            let greedy = greedy_attention(&f.model, &f.states, cfg.max_len_for(12)).unwrap();
            assert_eq!(best.labels, greedy, "seed {seed}");
        }
    }

    #[test]
    fn scores_are_additive_and_match_forced_scoring() {
        let f = fixture("abc", 10, Modality::Audio, 4);
        let mut rng = seeded_rng(9);
        let lm = RnnLm::new(3, 4, 5, &mut rng);
        let cfg = BeamConfig { beam_width: 5, ..BeamConfig::default() };
        let s = stream(&f, Some(&lm), &cfg);
        let hyps = beam_search(&s).unwrap();
        assert!(!hyps.is_empty());
        for w in hyps.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
        for h in &hyps {
            let parts = &h.streams[0];
            assert!((combine_scores(&cfg, parts.ctc, parts.att, parts.lm) - h.score).abs() < 1e-12);
            let forced = sequence_scores(&s, &h.labels).unwrap();
            assert!((forced.joint - h.score).abs() < 1e-9, "{} vs {}", forced.joint, h.score);
            assert!(h.labels.len() <= cfg.max_len_for(10));
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let f = fixture("abc", 10, Modality::Audio, 2);
        let cfg = BeamConfig { lm_weight: 0.0, ..BeamConfig::default() };
        assert_eq!(beam_search(&stream(&f, None, &cfg)).unwrap(), beam_search(&stream(&f, None, &cfg)).unwrap());
    }

    #[test]
    fn wider_beams_do_not_lose_on_toy_instances() {
        let mut disagreements = Vec::new();
        let mut non_monotone = Vec::new();
        for seed in 0..100 {
            let f = fixture("ab", 4, Modality::Audio, seed);
            let best = |width| {
                let cfg = BeamConfig { lm_weight: 0.0, beam_width: width, max_output_len: Some(4), ..BeamConfig::default() };
                beam_search(&stream(&f, None, &cfg)).unwrap().remove(0)
            };
            let full = best(exhaustive(2, 4));
            let narrow: Vec<RankedHypothesis> = [1, 2, 5, 20].into_iter().map(best).collect();
            for h in &narrow {
                assert!(full.score >= h.score - 1e-12, "seed {seed}");
            }
            if narrow[3].labels != full.labels {
                disagreements.push(seed);
            }
            if narrow.windows(2).any(|w| w[1].score < w[0].score) {
                non_monotone.push(seed);
            }
        }
        if !disagreements.is_empty() || !non_monotone.is_empty() {
            eprintln!("width 20 vs exhaustive differs on {disagreements:?}; non-monotone widths on {non_monotone:?}");
        }
        assert!(disagreements.len() <= 5);
    }

    #[test]
    fn late_fusion_degenerates_to_a_single_stream() {
        let a = fixture("abc", 10, Modality::Audio, 5);
        let v = fixture("abc", 10, Modality::Visual, 6);
        let (ca, cv) = (BeamConfig { lm_weight: 0.0, ..BeamConfig::default() }, BeamConfig::visual());
        let (sa, sv) = (stream(&a, None, &ca), stream(&v, None, &cv));
        for mode in [FusionMode::Late, FusionMode::LateRescore] {
            let only_audio = late_fusion_search(&sa, &sv, &FusionConfig { mode, gamma: 1.0 }).unwrap();
            let only_visual = late_fusion_search(&sa, &sv, &FusionConfig { mode, gamma: 0.0 }).unwrap();
            assert_eq!(only_audio[0].labels, beam_search(&sa).unwrap()[0].labels);
            assert_eq!(only_visual[0].labels, beam_search(&sv).unwrap()[0].labels);
        }
        let solo = beam_search(&sa).unwrap();
        assert_eq!(late_fusion_search(&sa, &sv, &FusionConfig { mode: FusionMode::Late, gamma: 1.0 }).unwrap()[0].score, solo[0].score);
    }

    #[test]
    fn identical_streams_fuse_to_the_same_output() {
        let a = fixture("abc", 10, Modality::Audio, 8);
        let cfg = BeamConfig { lm_weight: 0.0, ..BeamConfig::default() };
        let s = stream(&a, None, &cfg);
        let solo = beam_search(&s).unwrap();
        for gamma in [0.1, 0.5, 0.85] {
            let fused = late_fusion_search(&s, &s, &FusionConfig { mode: FusionMode::Late, gamma }).unwrap();
            assert_eq!(fused[0].labels, solo[0].labels);
            assert!((fused[0].score - solo[0].score).abs() < 1e-9);
        }
    }

    #[test]
    fn usage_errors() {
        let a = fixture("abc", 6, Modality::Audio, 1);
        let b = fixture("ab", 6, Modality::Audio, 1);
        let cfg = BeamConfig::default();
        let r = late_fusion_search(&stream(&a, None, &cfg), &stream(&b, None, &cfg), &FusionConfig::default());
        assert!(matches!(r, Err(Error::Usage(_))));
        let mut lm_rng = seeded_rng(1);
        let lm = RnnLm::new(5, 2, 2, &mut lm_rng);
        assert!(beam_search(&stream(&a, Some(&lm), &cfg)).is_err());
        let bad = BeamConfig { beam_width: 0, ..BeamConfig::default() };
        assert!(beam_search(&stream(&a, None, &bad)).is_err());
    }
}
