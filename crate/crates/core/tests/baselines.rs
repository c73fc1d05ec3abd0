use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use morlot::env::{ScriptFn, ScriptStep, ScriptedEnv};
use morlot::{
    fitest_search, mosa_search, random_search, Budget, Chromosome, EnvAction, ObjectiveId, SearchParams, Silent, SENTINEL,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_genes_are_uniform_over_the_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 17];
    let draws = 17 * 20_000;
    let chrom = Chromosome::random(draws, &EnvAction::ALL, &mut rng);
    for g in &chrom.genes {
        counts[g.index()] += 1;
    }
    // Pearson chi-square, 16 degrees of freedom; 39.25 is the 0.999 quantile.
    let expected = draws as f64 / 17.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 39.25, "chi2 {chi2:.2}, counts {counts:?}");
}

#[test]
fn random_search_hits_a_one_action_fault_at_the_uniform_rate() {
    let episodes = Arc::new(AtomicUsize::new(0));
    let hits = Arc::new(AtomicUsize::new(0));
    let (e, h) = (episodes.clone(), hits.clone());
    let script: ScriptFn = Arc::new(move |hist: &[EnvAction]| {
        e.fetch_add(1, Ordering::Relaxed);
        let hit = hist[0] == EnvAction::FogUp;
        h.fetch_add(hit as usize, Ordering::Relaxed);
        ScriptStep { rewards: vec![if hit { SENTINEL } else { 1.0 }], terminal: true }
    });
    let mut env = ScriptedEnv::new("one-step", 1, 4, script);
    let n = 34_000;
    let archive = random_search::<f64, _, _, _>(&mut env, &mut Budget::new(n as u64), &mut ChaCha8Rng::seed_from_u64(1), &mut Silent)
        .unwrap();
    assert_eq!(episodes.load(Ordering::Relaxed), n);
    let p = 1.0 / 17.0;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let got = hits.load(Ordering::Relaxed) as f64;
    assert!((got - n as f64 * p).abs() < 4.0 * sd, "{got} hits in {n}");
    let tc = archive.get(ObjectiveId(0)).unwrap();
    assert_eq!(tc.len(), 1);
}

/// The fault needs five FogUp in a row; every FogUp in the run moves the
/// reward closer, so fitness guides the search while random sampling
/// almost never lands on it.
fn staircase() -> ScriptFn {
    Arc::new(|hist: &[EnvAction]| {
        let ups = hist.iter().filter(|&&a| a == EnvAction::FogUp).count();
        let streak = hist.iter().rev().take_while(|&&a| a == EnvAction::FogUp).count();
        let r = if streak >= 5 { SENTINEL } else { 1.0 + ups as f64 };
        ScriptStep { rewards: vec![r, 1.0], terminal: false }
    })
}

#[test]
fn guided_searches_climb_the_staircase() {
    let params = SearchParams { population_size: Some(20), ..Default::default() };
    let budget = 400_000;
    let mut found = [0usize; 3];
    for seed in 0..3 {
        let mut env = ScriptedEnv::new("staircase", 2, 10, staircase());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mosa = mosa_search::<f64, _, _, _>(&mut env, &mut Budget::new(budget), &params, &mut rng, &mut Silent).unwrap();
        found[0] += mosa.archive.covers(ObjectiveId(0)) as usize;
        let fitest = fitest_search::<f64, _, _, _>(&mut env, &mut Budget::new(budget), &params, &mut rng, &mut Silent).unwrap();
        found[1] += fitest.archive.covers(ObjectiveId(0)) as usize;
        let rs = random_search::<f64, _, _, _>(&mut env, &mut Budget::new(budget), &mut rng, &mut Silent).unwrap();
        found[2] += rs.covers(ObjectiveId(0)) as usize;
        for archive in [&mosa.archive, &fitest.archive] {
            if let Some(tc) = archive.get(ObjectiveId(0)) {
                let tail: Vec<EnvAction> = tc.actions().collect();
                assert!(tail[tail.len() - 5..].iter().all(|&a| a == EnvAction::FogUp));
            }
        }
    }
    assert_eq!(found[0], 3, "MOSA {found:?}");
    assert_eq!(found[1], 3, "FITEST {found:?}");
    assert!(found[2] < 3, "RS {found:?}");
}
