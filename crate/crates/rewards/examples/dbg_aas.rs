fn main() {
    // perfect diag 32x32
    let n = 32;
    let mut data = vec![0.0; n * n];
    for i in 0..n { for j in 0..n { data[i*n+j] = if i==j {10.0} else {-10.0}; } }
    let raw = rewards::ScoreMap::new(data, n, n).unwrap();
    let r = rewards::aas::aas_single(&raw);
    println!("perfect: cov {:.4} mono {:.4} conf {:.4} aas {:.4} path_len {}", r.coverage, r.monotonicity, r.path_confidence, r.aas, r.dtw_path.len());
    let m = rewards::synthetic::corrupted_alignment_map(64, 16, 0.0, 1);
    let r = rewards::aas::aas_single(&m);
    println!("clean gauss: cov {:.4} mono {:.4} conf {:.4} aas {:.4} path_len {}", r.coverage, r.monotonicity, r.path_confidence, r.aas, r.dtw_path.len());
}
