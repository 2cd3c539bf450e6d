use crashaudit::spatial::{local_i_values, local_morans, LisaCluster, LisaConfig, SpatialWeights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn iowa_lattice() -> SpatialWeights {
    SpatialWeights::parse_adjacency(crashaudit::spatial::IOWA_LATTICE_CSV).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (Vec<String>, Vec<(String, String)>) {
    let units: Vec<String> = (0..n).map(|i| format!("U{i:02}")).collect();
    let mut pairs = Vec::new();
    // a ring keeps every unit connected; extra chords at random
    for i in 0..n {
        pairs.push((units[i].clone(), units[(i + 1) % n].clone()));
    }
    for i in 0..n {
        for j in i + 2..n {
            if !(i == 0 && j == n - 1) && rng.random::<f64>() < 0.25 {
                pairs.push((units[i].clone(), units[j].clone()));
            }
        }
    }
    let reversed: Vec<(String, String)> = pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
    pairs.extend(reversed);
    (units, pairs)
}

/// Dense brute-force local Moran's I with an explicit weight matrix.
fn brute_force(x: &[f64], units: &[String], pairs: &[(String, String)]) -> Vec<f64> {
    let n = x.len();
    let idx = |u: &str| units.iter().position(|v| v == u).unwrap();
    let mut w = vec![vec![0.0; n]; n];
    for (a, b) in pairs {
        w[idx(a)][idx(b)] = 1.0;
        w[idx(b)][idx(a)] = 1.0;
    }
    for row in w.iter_mut() {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut lag = 0.0;
        for j in 0..n {
            lag += w[i][j] * z[j];
        }
        out[i] = z[i] * lag / m2;
    }
    out
}

#[test]
fn matches_brute_force_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(3..=12);
        let (units, pairs) = random_graph(&mut rng, n);
        let w = SpatialWeights::from_pairs(&units, &pairs).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let got = local_i_values(&x, &w);
        let want = brute_force(&x, &units, &pairs);
        for (g, e) in got.iter().zip(&want) {
            assert!((g - e).abs() <= 1e-12, "{g} vs {e}");
        }
        let values: BTreeMap<String, f64> = units.iter().cloned().zip(x.iter().copied()).collect();
        let res = local_morans(&values, &w, &LisaConfig { n_perm: 99, ..Default::default() }).unwrap();
        for (row, e) in res.rows.iter().zip(&want) {
            assert!((row.local_i - e).abs() <= 1e-12);
        }
    }
}

#[test]
fn constant_field_is_flat() {
    let w = iowa_lattice();
    let values: BTreeMap<String, f64> = w.units().iter().map(|u| (u.clone(), 0.24)).collect();
    let res = local_morans(&values, &w, &LisaConfig::default()).unwrap();
    assert!(res.rows.iter().all(|r| r.local_i == 0.0 && r.cluster == LisaCluster::NotSignificant));
    assert_eq!(res.significant().count(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_maps_leave_local_i_unchanged(
        seed in any::<u64>(),
        n in 4usize..=12,
        shift in -100.0f64..100.0,
        scale in 0.01f64..100.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (units, pairs) = random_graph(&mut rng, n);
        let w = SpatialWeights::from_pairs(&units, &pairs).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let a = local_i_values(&x, &w);
        let b = local_i_values(&y, &w);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0), "{} vs {}", p, q);
        }
    }
}

#[test]
fn permutation_p_values_are_calibrated_under_exchangeability() {
    let w = iowa_lattice();
    let mut hits = 0usize;
    let seeds = 5;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let values: BTreeMap<String, f64> = w.units().iter().map(|u| (u.clone(), rng.random::<f64>())).collect();
        let res = local_morans(&values, &w, &LisaConfig { seed, ..Default::default() }).unwrap();
        hits += res.rows.iter().filter(|r| r.pseudo_p <= 0.05).count();
    }
    let frac = hits as f64 / (seeds as usize * w.len()) as f64;
    assert!(frac <= 0.08, "{frac}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let w = iowa_lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: BTreeMap<String, f64> = w.units().iter().map(|u| (u.clone(), rng.random::<f64>())).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| local_morans(&values, &w, &LisaConfig::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}
