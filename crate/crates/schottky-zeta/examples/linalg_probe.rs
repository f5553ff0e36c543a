use schottky_zeta::experiments::*;
use schottky_zeta::schottky::symmetric_four_disk;
use schottky_zeta::transfer::RepProvider;
use schottky_zeta::zeta::{ZetaFunction, ZetaKind};
use std::time::Instant;

fn main() {
    let g = symmetric_four_disk();

    let t0 = Instant::now();
    let cfg = GapExperimentConfig {
        degrees: vec![2, 4],
        trials: 4,
        degree: 8,
        contour_nodes: 64,
        audits: 1,
        base_seed: 7,
        ..Default::default()
    };
    let rec = run_gap_experiment(&g, &cfg).unwrap();
    println!("gap experiment in {:?}", t0.elapsed());
    print!("{}", rec.to_csv());
    for d in &rec.per_degree {
        println!("n={} frac={} mean={} transitive={}", d.n, d.fraction_with_new_zeros, d.mean_new_zero_count, d.transitive_fraction);
    }
    for a in &rec.audits {
        println!("audit n={} trial={} matched={} new={:?} diff={:?}", a.n, a.trial, a.matched, a.new_zeros, a.cover_minus_base);
    }

    let t1 = Instant::now();
    let delta = rec.delta;
    let zf = ZetaFunction::new(&g, ZetaKind::Standard, &RepProvider::trivial(), 20).unwrap();
    let audit = jensen_audit(&zf, delta + 0.3, 0.5).unwrap();
    println!("jensen trivial: zero side {:.8}, integral side {:.8}, residual {:.2e} ({:?})",
        audit.zero_side, audit.integral_side, audit.residual, t1.elapsed());
    println!("expected single-zero LHS = {:.8}", (audit.radius / 0.3).ln());

    let t2 = Instant::now();
    let hs_cfg = HsDecayConfig { degrees: vec![2, 4, 8], trials: 3, degree: 10, base_seed: 3, ..Default::default() };
    let hs = run_hs_decay(&g, &hs_cfg).unwrap();
    println!("hs decay in {:?}: slopes {:?}", t2.elapsed(), hs.slopes);

    let t3 = Instant::now();
    let ps = run_partition_scaling(&g, &PartitionScalingConfig::default()).unwrap();
    println!("partition scaling in {:?}: size_exp {:.4} (delta = {:.4}) id_exp {:.4} pow_exp {:.4}",
        t3.elapsed(), ps.size_exponent, delta, ps.identity_exponent, ps.power_exponent);
    for r in &ps.rows { println!("  tau={:.2e} |Z|={} id={} pow={} len {}..{}", r.tau, r.partition_size, r.identity_pairs, r.power_pairs, r.min_len, r.max_len); }
}
