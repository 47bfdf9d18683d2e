// Validates the MCMC placement against brute-force rejection samples at a
// density where rejection is feasible, and prints degree/static stats per
// density for the generated distribution.
use c3run_core::harness::child_seed;
use c3run_core::model::{LinkParams, NetworkState, NodeId, Point, UavNode};
use c3run_core::recovery::{assess_failure, static_cc_repair};
use c3run_core::simulator::{generate_connected_topology, select_failure, Scenario};
use c3run_core::recovery::RunLimits;
use c3run_core::topology::{build_adjacency, connected_components, frontiers, is_connected};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean_degree(state: &NetworkState, params: &LinkParams) -> f64 {
    let g = build_adjacency(state, params);
    2.0 * g.edge_count() as f64 / g.node_count() as f64
}

fn main() {
    let params = LinkParams::default();

    // rejection reference at n=50 (feasible at ~0.55%)
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut rej_deg = 0.0;
    let mut rej_count = 0;
    while rej_count < 30 {
        let nodes: Vec<UavNode> = (0..50)
            .map(|i| {
                UavNode::new(
                    NodeId(i as u32),
                    Point::new(rng.gen_range(0.0..=300.0), rng.gen_range(0.0..=300.0)),
                    1.0,
                )
                .unwrap()
            })
            .collect();
        let state = NetworkState::new(nodes).unwrap();
        if is_connected(&build_adjacency(&state, &params), &[]) {
            rej_deg += mean_degree(&state, &params);
            rej_count += 1;
        }
    }
    println!("n=50 rejection reference: mean degree {:.3}", rej_deg / 30.0);

    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let mut mc_deg = 0.0;
    for _ in 0..30 {
        let state = generate_connected_topology(50, 300.0, 1.0, &params, &mut rng, 10_000).unwrap();
        mc_deg += mean_degree(&state, &params);
    }
    println!("n=50 mcmc:                 mean degree {:.3}", mc_deg / 30.0);

    // per-density stats over generated scenarios
    let limits = RunLimits::default();
    for n in [20usize, 25, 30, 35, 40, 45, 50] {
        let trials = 200;
        let mut deg = 0.0;
        let mut static_ok = 0;
        let mut smallest_sum = 0usize;
        let mut two_cluster = 0usize;
        for t in 0..trials {
            let seed = child_seed(4242, n, t);
            let sc = Scenario::generate(n, 300.0, 1.0, &params, &limits, seed).unwrap();
            deg += mean_degree(&sc.state, &params);
            let mut state = sc.state.clone();
            let a = assess_failure(&mut state, sc.failed, &params).unwrap();
            smallest_sum += a.clusters.iter().map(|c| c.members.len()).min().unwrap();
            if a.clusters.len() == 2 {
                two_cluster += 1;
            }
            // all-pairs static repair feasibility (coop-bridges style)
            let fronts = frontiers(&state, sc.failed, &a.clusters, &params).unwrap();
            let mut meta: Vec<usize> = (0..fronts.len()).collect();
            fn find(m: &mut Vec<usize>, i: usize) -> usize {
                if m[i] != i { let r = find(m, m[i]); m[i] = r; }
                m[i]
            }
            for i in 0..fronts.len() {
                for j in (i + 1)..fronts.len() {
                    if static_cc_repair(&state, &fronts[i].members, &fronts[j].members, &params)
                        .unwrap()
                        .is_some()
                    {
                        let (ri, rj) = (find(&mut meta, i), find(&mut meta, j));
                        meta[ri] = rj;
                    }
                }
            }
            let r0 = find(&mut meta, 0);
            if (1..fronts.len()).all(|i| find(&mut meta, i) == r0) {
                static_ok += 1;
            }
            let _ = connected_components(&build_adjacency(&state, &params));
            let _ = select_failure(&state, &params, &mut ChaCha8Rng::seed_from_u64(0));
        }
        println!(
            "n={n}: mean degree {:.2}, static-solvable {:.3}, mean smallest cluster {:.2}, two-cluster {:.2}",
            deg / trials as f64,
            static_ok as f64 / trials as f64,
            smallest_sum as f64 / trials as f64,
            two_cluster as f64 / trials as f64,
        );
    }
}
