mod common;

use std::collections::BTreeSet;

use common::*;
use flexride_core::preprocess::accessible_nodes;
use flexride_core::trips::enrich;
use flexride_core::AccessMethod;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn yen_equals_enumeration(seed in any::<u64>(), k in 1usize..=10) {
        let mut rng = seeded(seed);
        let net = random_network(&mut rng, 2, 8, 2);
        let n = net.node_count() as u32;
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                let want: Vec<(i64, Vec<u32>)> = all_simple_paths(&net, i, j).into_iter().take(k).collect();
                let got: Vec<(i64, Vec<u32>)> = net
                    .k_shortest_paths(i, j, k)
                    .unwrap()
                    .into_iter()
                    .map(|p| (p.total_time, p.nodes))
                    .collect();
                prop_assert_eq!(got, want, "{} -> {}", i, j);
            }
        }
    }

    #[test]
    fn exact_sets_match_brute_force(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let net = random_network(&mut rng, 2, 50, 2);
        let d = all_pairs(&net);
        let n = net.node_count() as u32;
        for k in 0..10 {
            let o = rng.gen_range(1..=n);
            let e = rng.gen_range(1..=n);
            let Some(lambda) = d[o as usize][e as usize].filter(|_| o != e) else { continue };
            let ed = rng.gen_range(0..100);
            let la = ed + lambda + rng.gen_range(0..=60);
            let p = enrich(&net, &announce(&format!("p{k}"), None, 0, o, e, ed, la, 600)).unwrap();
            let want: BTreeSet<u32> = (1..=n)
                .filter(|&i| matches!((d[o as usize][i as usize], d[i as usize][e as usize]), (Some(a), Some(b)) if a + b <= la - ed))
                .collect();
            let exact = accessible_nodes(&net, &p, AccessMethod::Exact).unwrap();
            prop_assert_eq!(&exact, &want);
            for kk in [1, 3, 10] {
                let yen = accessible_nodes(&net, &p, AccessMethod::Yen(kk)).unwrap();
                prop_assert!(yen.is_subset(&exact));
                prop_assert!(yen.contains(&o) && yen.contains(&e));
            }
        }
    }
}

#[test]
fn floyd_warshall_agrees_with_dijkstra() {
    let mut rng = seeded(11);
    let net = random_network(&mut rng, 20, 30, 2);
    let d = all_pairs(&net);
    for a in net.nodes() {
        for b in net.nodes() {
            assert_eq!(net.shortest_travel_time(a.id, b.id).unwrap(), d[a.id as usize][b.id as usize]);
        }
    }
}
