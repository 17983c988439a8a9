use proptest::prelude::*;

use avsr::ctc::{ctc_loss, ctc_prefix_init, LogProbLattice};
use avsr::features::*;
use avsr::harness::edit_distance_report;
use avsr::models::{Alphabet, LanguageModel, LmConfig};
use avsr::numerics::{log_sum_exp, Matrix};

fn lattice(frames: usize, labels: usize, logits: &[f64]) -> LogProbLattice {
    let m = Matrix::from_vec(frames, labels + 1, logits[..frames * (labels + 1)].to_vec()).unwrap();
    LogProbLattice::from_logits(m, 50.0)
}

fn sequences(max_len: usize, labels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s: &Vec<usize>| (0..labels).map(move |k| [s.clone(), vec![k]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn levenshtein(r: &[u8], h: &[u8]) -> usize {
    let mut d = vec![vec![0usize; h.len() + 1]; r.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h.len() {
        d[0][j] = j;
    }
    for i in 1..=r.len() {
        for j in 1..=h.len() {
            d[i][j] = (d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1])).min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[r.len()][h.len()]
}

fn tokens() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, 1..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_sum_exp_bounds_and_permutation(mut v in prop::collection::vec(-50.0f64..50.0, 1..12), seed in any::<u64>()) {
        let s = log_sum_exp(&v).unwrap();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s >= max - 1e-12);
        prop_assert!(s <= max + (v.len() as f64).ln() + 1e-12);
        let k = (seed % v.len() as u64) as usize;
        v.rotate_left(k);
        v.reverse();
        prop_assert!((log_sum_exp(&v).unwrap() - s).abs() <= 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn log_sum_exp_is_monotone(v in prop::collection::vec(-50.0f64..50.0, 1..12), i in any::<prop::sample::Index>(), bump in 0.0f64..5.0) {
        let mut w = v.clone();
        let i = i.index(v.len());
        w[i] += bump;
        prop_assert!(log_sum_exp(&w).unwrap() >= log_sum_exp(&v).unwrap());
    }

    #[test]
    fn log_sum_exp_pairs_add_in_linear_domain(a in (1e-10f64).ln()..0.0, b in (1e-10f64).ln()..0.0) {
        let s = log_sum_exp(&[a, b]).unwrap();
        prop_assert!((s.exp() - (a.exp() + b.exp())).abs() <= 1e-12);
    }

    #[test]
    fn ctc_output_distribution_sums_to_one(frames in 1usize..=4, labels in 1usize..=2, logits in prop::collection::vec(-3.0f64..3.0, 12)) {
        let lat = lattice(frames, labels, &logits);
        // the empty output is all blanks
        let mut total = (0..frames).map(|t| lat.at(t, lat.blank())).sum::<f64>().exp();
        for y in sequences(frames, labels).into_iter().skip(1) {
            let l = ctc_loss(&lat, &y).unwrap();
            if l.feasible {
                total += l.log_prob.exp();
            }
        }
        prop_assert!((total - 1.0).abs() <= 1e-9, "total {total}");
    }

    #[test]
    fn terminated_prefix_equals_ctc_loss(
        frames in 1usize..=6,
        labels in 1usize..=3,
        logits in prop::collection::vec(-3.0f64..3.0, 24),
        target in prop::collection::vec(0usize..3, 1..=4),
    ) {
        let lat = lattice(frames, labels, &logits);
        let target: Vec<usize> = target.into_iter().map(|k| k % labels).collect();
        let mut st = ctc_prefix_init(&lat);
        for &k in &target {
            st = st.extend(k, &lat);
        }
        let l = ctc_loss(&lat, &target).unwrap();
        if l.feasible {
            prop_assert!((st.terminated_log_prob() - l.log_prob).abs() <= 1e-10);
        } else {
            prop_assert_eq!(st.terminated_log_prob(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn mixing_ignores_noise_scale_and_tracks_db(seed in any::<u64>(), snr in -10.0f64..25.0, len in 400usize..1200) {
        let cfg = CorpusConfig::default();
        let signal = generate_noise(NoiseKind::Tonal, len, &cfg, seed ^ 1).unwrap();
        let noise = generate_noise(NoiseKind::White, len, &cfg, seed).unwrap();
        let doubled = Waveform::new(noise.samples().iter().map(|x| 2.0 * x).collect(), noise.sample_rate()).unwrap();
        let base = mix_at_snr(&signal, &noise, SnrLevel::Db(snr)).unwrap();
        let same = mix_at_snr(&signal, &doubled, SnrLevel::Db(snr)).unwrap();
        for (a, b) in base.samples().iter().zip(same.samples()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        // +20·log10(2) dB halves the added noise
        let quieter = mix_at_snr(&signal, &noise, SnrLevel::Db(snr + 20.0 * 2f64.log10())).unwrap();
        for ((q, b), s) in quieter.samples().iter().zip(base.samples()).zip(signal.samples()) {
            prop_assert!(((q - s) - 0.5 * (b - s)).abs() <= 1e-9 * (b - s).abs().max(1.0));
        }
    }

    #[test]
    fn log_mel_frame_count(len in 400usize..4000) {
        let w = Waveform::new(vec![0.1; len], 16000.0).unwrap();
        let f = log_mel(&w, &MelConfig::default()).unwrap();
        prop_assert_eq!(f.len(), (len - 400) / 160 + 1);
    }

    #[test]
    fn resampling_up_then_down_restores_frames(frames in 1usize..30, values in prop::collection::vec(-5.0f64..5.0, 90)) {
        let m = Matrix::from_vec(frames, 3, values[..frames * 3].to_vec()).unwrap();
        let seq = FeatureSequence::new(m, 25.0, StreamKind::Visual).unwrap();
        let back = resample_frames(&resample_frames(&seq, 50.0).unwrap(), 25.0).unwrap();
        prop_assert_eq!(back.frames(), seq.frames());
    }

    #[test]
    fn edit_distance_matches_oracle_and_is_a_metric(a in tokens(), b in tokens(), c in tokens()) {
        let d = |x: &[u8], y: &[u8]| edit_distance_report(x, y).unwrap().errors();
        prop_assert_eq!(d(&a, &b), levenshtein(&a, &b));
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
    }

    #[test]
    fn alphabet_round_trips_text(ids in prop::collection::vec(0usize..11, 0..20)) {
        let alphabet = Alphabet::toy();
        let text = alphabet.decode(&ids);
        prop_assert_eq!(alphabet.encode(&text).unwrap(), ids);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lm_steps_chain_to_sequence_probability(seed in 0u64..1000, labels in prop::collection::vec(0usize..11, 0..10)) {
        let alphabet = Alphabet::toy();
        let lm = LanguageModel::new(alphabet.clone(), LmConfig { seed, ..LmConfig::default() });
        let mut state = lm.net.initial_state();
        let mut prev = alphabet.sos_id();
        let mut total = 0.0;
        for &k in labels.iter().chain(std::iter::once(&alphabet.len())) {
            let (next, logp) = lm.net.lm_step(&state, prev).unwrap();
            prop_assert!(log_sum_exp(&logp).unwrap().abs() <= 1e-9);
            total += logp[k];
            state = next;
            prev = k;
        }
        let nll = lm.net.sequence_nll(&labels, None).unwrap();
        prop_assert!((total + nll).abs() <= 1e-10 * nll.abs().max(1.0));
    }

    #[test]
    fn synthesis_is_reproducible(seed in any::<u64>(), ids in prop::collection::vec(0usize..11, 1..5)) {
        let cfg = CorpusConfig::default();
        let a = synthesize_utterance(&ids, &cfg, seed).unwrap();
        let b = synthesize_utterance(&ids, &cfg, seed).unwrap();
        prop_assert_eq!(a.waveform.samples(), b.waveform.samples());
        prop_assert_eq!(a.visual.frames(), b.visual.frames());
    }
}
