//! Synthesize one toy utterance, corrupt it with each noise family and turn
//! it into the 50 fps audio and visual model streams.

use avsr::features::*;

fn main() -> avsr::error::Result<()> {
    let corpus = CorpusConfig::default();
    let mel = MelConfig::default();
    let labels = corpus.alphabet.encode("bad cafe")?;
    let utt = synthesize_utterance(&labels, &corpus, 42)?;
    println!(
        "\"bad cafe\": {:.2}s of audio, {} visual frames at {} fps",
        utt.waveform.duration_secs(),
        utt.visual.len(),
        utt.visual.fps()
    );

    let clean = log_mel(&utt.waveform, &mel)?;
    println!("log-mel: {} frames x {} bins at {} fps", clean.len(), clean.dim(), clean.fps());

    for kind in NoiseKind::ALL {
        let noise = generate_noise(kind, utt.waveform.len(), &corpus, 1)?;
        for db in [-5.0, 10.0] {
            let noisy = mix_at_snr(&utt.waveform, &noise, SnrLevel::Db(db))?;
            let added: Vec<f64> = noisy.samples().iter().zip(utt.waveform.samples()).map(|(y, x)| y - x).collect();
            let achieved = 10.0 * (signal_power(utt.waveform.samples()) / signal_power(&added)).log10();
            let streams = model_streams(&noisy, &utt.visual, &mel)?;
            println!(
                "{:>6} @ {db:>5} dB: achieved {achieved:.4} dB, streams {}x{} audio / {}x{} visual",
                kind.name(),
                streams.audio.len(),
                streams.audio.dim(),
                streams.visual.len(),
                streams.visual.dim()
            );
        }
    }
    Ok(())
}
