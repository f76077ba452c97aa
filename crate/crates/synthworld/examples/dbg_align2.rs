use synthworld::spec::{make_spec, SpecConstraints};
use synthworld::render::render;
use synthworld::oracle::detect_alignment;

fn main() {
    let spec = make_spec(52, &SpecConstraints::default()).unwrap();
    let song = render(&spec);
    let lyrics: Vec<u8> = spec.lyrics.iter().flatten().cloned().collect();
    let det = detect_alignment(&song.mono(), &lyrics).unwrap();
    println!("bpm {} half-beat {:.3}s", spec.bpm, 30.0 / spec.bpm as f64);
    let mut truth: Vec<(u8, f64)> = song.alignment.iter().map(|a| (a.token, a.onset_s)).collect();
    truth.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    println!("{:>8} {:>8} {:>6}", "true", "det", "tok");
    let mut di = 0;
    for &(tok, t) in &truth {
        // find nearest detection of same token
        let best = det.iter().filter(|d| d.0 == tok).min_by(|a, b| ((a.1 - t).abs()).partial_cmp(&(b.1 - t).abs()).unwrap());
        match best {
            Some(&(_, dt)) => println!("{t:8.3} {dt:8.3} {tok:>6} diff {:+.1} ms", (dt - t) * 1000.0),
            None => println!("{t:8.3} {:>8} {tok:>6}", "MISS"),
        }
        di += 1;
    }
    let _ = di;
    println!("detections not near any truth:");
    for &(tok, dt) in &det {
        if !truth.iter().any(|&(t2, tt)| t2 == tok && (tt - dt).abs() <= 0.035) {
            println!("  tok {tok} at {dt:.3}");
        }
    }
}
