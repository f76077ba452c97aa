use synthworld::spec::{make_spec, SpecConstraints};
use synthworld::render::render;
use synthworld::oracle::analyze_tempo;

fn main() {
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for seed in 0..100u64 {
        let spec = make_spec(seed, &SpecConstraints::default()).unwrap();
        let song = render(&spec);
        let est = analyze_tempo(&song.mono()).unwrap();
        let err = (est - spec.bpm as f64).abs() / spec.bpm as f64;
        if err > worst { worst = err; }
        if err > 0.02 {
            fails += 1;
            println!("seed {seed} bpm {} est {est:.2} err {:.2}% instr {:?}", spec.bpm, err*100.0, spec.instruments);
        }
    }
    println!("worst err {:.3}%  fails>2%: {fails}/100", worst * 100.0);
}
