use synthworld::spec::{make_spec, SpecConstraints};
use synthworld::render::render;
use synthworld::oracle::detect_alignment;

fn main() {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    let mut songs = 0;
    let mut bias_sum = 0.0; let mut bias_n = 0usize;
    for seed in 0..60u64 {
        let spec = make_spec(seed, &SpecConstraints::default()).unwrap();
        let song = render(&spec);
        if song.alignment.is_empty() { continue; }
        songs += 1;
        let lyrics: Vec<u8> = spec.lyrics.iter().flatten().cloned().collect();
        let det = detect_alignment(&song.mono(), &lyrics).unwrap();
        let mut matched = vec![false; song.alignment.len()];
        let mut dfp = 0;
        for &(tok, onset) in &det {
            let hit = song.alignment.iter().enumerate().find(|(i, a)| {
                !matched[*i] && a.token == tok && (a.onset_s - onset).abs() <= 0.035
            });
            match hit { Some((i, a)) => { matched[i] = true; tp += 1; bias_sum += onset - a.onset_s; bias_n += 1; }, None => { fp += 1; dfp += 1; } }
        }
        let miss = matched.iter().filter(|&&m| !m).count();
        fnn += miss;
        if miss > 0 || dfp > 0 {
            println!("seed {seed} bpm {}: {} true, {} det, miss {miss}, fp {dfp}", spec.bpm, song.alignment.len(), det.len());
        }
    }
    let recall = tp as f64 / (tp + fnn) as f64;
    let precision = tp as f64 / (tp + fp) as f64;
    println!("songs {songs}: recall {recall:.4} precision {precision:.4} (tp {tp} fp {fp} fn {fnn}) mean bias {:.1} ms", bias_sum / bias_n.max(1) as f64 * 1000.0);
}
