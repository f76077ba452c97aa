use synthworld::spec::{make_spec, SpecConstraints};
use synthworld::render::render;
use synthworld::oracle::debug_token_evidence;

fn main() {
    let spec = make_spec(52, &SpecConstraints::default()).unwrap();
    let song = render(&spec);
    let mono = song.mono();
    for tok in [43u8, 35] {
        let (ev, median) = debug_token_evidence(&mono, tok);
        println!("tok {tok} thr {:.4}", (6.0 * median).max(0.15));
        let t_fp = if tok == 43 { 3.599 } else { 5.999 };
        for w in 0..ev.len() {
            let t = (w * 32 + 128) as f64 / 4800.0;
            if (t - t_fp).abs() < 0.06 {
                println!("  t {t:.3} e {:.4}", ev[w]);
            }
        }
    }
    // where are true tok-43 occurrences?
    for a in &song.alignment {
        if a.token == 43 || a.token == 35 {
            println!("truth tok {} at {:.3}", a.token, a.onset_s);
        }
    }
}
