use cslearn::bsr::{bsr_fit_traced, StepAction};
use cslearn::cs::{binomial, cs_search, rate_features, top_rsq, CsParams, RankedModels};
use cslearn::dictionary::{build_dictionary, evaluate_dictionary};
use cslearn::projection::ProjectedDesign;
use cslearn::regression::{ols_solve, standardize, DesignMatrix, StandardizeOptions};
use cslearn::search::SearchProblem;
use cslearn::ModelMask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Two features uniform on [−1, 1] expanded into the 15-term dictionary.
fn design15(n: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    let dict = build_dictionary(2, 4, 4);
    assert_eq!(dict.len(), 15);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    evaluate_dictionary(&rows, &dict).unwrap()
}

/// Two normal features with means in [−20, 20] whose spreads overlap by
/// about 5%, as in the random-polynomial benchmark.
fn overlapping_design15(n: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    let dict = build_dictionary(2, 4, 4);
    let means: Vec<f64> = (0..2).map(|_| rng.random_range(-20.0..20.0)).collect();
    let sd = (means[0] - means[1]).abs() / (2.0 * 1.959964);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| means.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    evaluate_dictionary(&rows, &dict).unwrap()
}

/// Random truth of `size` distinct non-constant terms with weights ±[1, 4].
fn planted(k: &DesignMatrix, size: usize, sigma: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>) {
    let mut terms: Vec<usize> = Vec::new();
    while terms.len() < size {
        let j = rng.random_range(1..k.ncols());
        if !terms.contains(&j) {
            terms.push(j);
        }
    }
    terms.sort_unstable();
    let mut y = vec![0.0; k.nrows()];
    for &j in &terms {
        let w = rng.random_range(1.0..4.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for (yi, kij) in y.iter_mut().zip(k.column(j)) {
            *yi += w * kij;
        }
    }
    for yi in y.iter_mut() {
        *yi += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    (terms, y)
}

fn noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Naive ranking: OLS on every subset of the standardized design.
fn naive_ranking(y: &[f64], k: &DesignMatrix, m: usize) -> Vec<(f64, Vec<usize>)> {
    let (ys, ks, _) = standardize(y, k, StandardizeOptions::search()).unwrap();
    let mut all: Vec<(f64, Vec<usize>)> = combinations(k.ncols(), m)
        .into_iter()
        .filter_map(|idx| ols_solve(&ks.select(&idx), &ys.values).ok().map(|s| (s.rss, idx)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    all
}

fn strip_timing(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(its) = v["diagnostics"]["iterations"].as_array_mut() {
        for it in its {
            it["wall_time_secs"] = serde_json::Value::from(0.0);
        }
    }
    v
}

#[test]
fn top_rsq_agrees_with_naive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let k = design15(60, &mut rng);
    let (_, y) = planted(&k, 3, 0.3, &mut rng);
    let problem = SearchProblem::new(&y, &k).unwrap();
    let active: Vec<usize> = (0..15).collect();
    for m in 1..=4 {
        let keep = 20;
        let ranked = top_rsq(problem.projection(), &active, m, keep).unwrap();
        assert_eq!(ranked.evaluated, binomial(15, m));
        let naive = naive_ranking(&y, &k, m);
        assert_eq!(ranked.masks.len(), keep.min(naive.len()));
        for (pos, mask) in ranked.masks.iter().enumerate() {
            assert_eq!(mask.indices(), naive[pos].1, "m={m} position {pos}");
            assert!((ranked.rss[pos] - naive[pos].0).abs() <= 1e-9 * (1.0 + naive[pos].0));
        }
        // Nothing left out scores better than the worst kept model.
        let worst_kept = *ranked.rss.last().unwrap();
        for (rss, _) in naive.iter().skip(keep) {
            assert!(*rss >= worst_kept - 1e-9);
        }
    }
}

#[test]
fn top_rsq_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = design15(40, &mut rng);
    let y = noise(40, &mut rng);
    let proj = ProjectedDesign::new(&k, &y).unwrap();
    let active = vec![2, 5, 7, 9];
    let all = top_rsq(&proj, &active, 4, 10).unwrap();
    assert_eq!(all.masks.len(), 1);
    assert_eq!(all.masks[0].indices(), active);
    let pairs = top_rsq(&proj, &active, 2, 100).unwrap();
    assert_eq!(pairs.masks.len(), 6);
    assert!(pairs.scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn top_rsq_counts_p72_triples() {
    let dict = build_dictionary(3, 4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let k = evaluate_dictionary(&rows, &dict).unwrap();
    let y = noise(200, &mut rng);
    let problem = SearchProblem::new(&y, &k).unwrap();
    let active: Vec<usize> = (0..72).collect();
    let ranked = top_rsq(problem.projection(), &active, 3, 36).unwrap();
    assert_eq!(ranked.evaluated, 59_640);
}

#[test]
fn true_model_is_best_of_its_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let k = design15(100, &mut rng);
        let (truth, y) = planted(&k, 3, 0.0, &mut rng);
        let problem = SearchProblem::new(&y, &k).unwrap();
        let active: Vec<usize> = (0..15).collect();
        let ranked = top_rsq(problem.projection(), &active, 3, 5).unwrap();
        assert_eq!(ranked.masks[0].indices(), truth);
    }
}

#[test]
fn rating_matches_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = 12;
    let mut masks = Vec::new();
    let mut scores = Vec::new();
    let mut score = 1.0;
    for _ in 0..20 {
        let mut mask = ModelMask::empty(p);
        while mask.size() < 3 {
            mask.set(rng.random_range(0..p), true);
        }
        masks.push(mask);
        score -= rng.random_range(0.0..0.04);
        scores.push(score);
    }
    let ranked = RankedModels {
        model_size: 3,
        rss: vec![0.0; masks.len()],
        masks: masks.clone(),
        scores: scores.clone(),
        evaluated: 20,
        invalid: 0,
    };
    for s in [1, 5, 20] {
        let rating = rate_features(&ranked, s, p);
        let mut count = vec![0.0; p];
        for i in 0..s {
            for j in 0..p {
                if masks[i].contains(j) {
                    count[j] += scores[i];
                }
            }
        }
        let max = count.iter().cloned().fold(f64::MIN, f64::max);
        for j in 0..p {
            assert!((rating[j] - count[j] / max).abs() <= 1e-12);
        }
        if s == 1 {
            for j in 0..p {
                assert_eq!(rating[j], if masks[0].contains(j) { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn cs_is_deterministic_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let k = design15(120, &mut rng);
    let (_, y) = planted(&k, 3, 0.1, &mut rng);
    let params = CsParams::for_dictionary_size(15);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| cs_search(&y, &k, &params)).unwrap();
        strip_timing(serde_json::to_value(&out).unwrap()).to_string()
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn cs_recovers_noise_free_two_term_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let k = overlapping_design15(100, &mut rng);
    let (truth, y) = planted(&k, 2, 0.0, &mut rng);
    let out = cs_search(&y, &k, &CsParams::for_dictionary_size(15)).unwrap();
    assert_eq!(out.model_star.mask.indices(), truth);
}

#[test]
fn cs_stays_small_on_pure_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let trials = 50;
    let mut small = 0;
    for _ in 0..trials {
        let k = design15(100, &mut rng);
        let y = noise(100, &mut rng);
        let out = cs_search(&y, &k, &CsParams::for_dictionary_size(15)).unwrap();
        if out.model_star.mask.size() <= 2 {
            small += 1;
        }
    }
    assert!(small * 5 >= trials * 4, "{small}/{trials}");
}

#[test]
fn cs_never_prunes_a_true_term_on_clean_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for trial in 0..25 {
        let k = design15(80, &mut rng);
        let size = 1 + trial % 3;
        let (truth, y) = planted(&k, size, 0.0, &mut rng);
        let out = cs_search(&y, &k, &CsParams::for_dictionary_size(15)).unwrap();
        for it in &out.diagnostics.iterations {
            for t in &truth {
                assert!(!it.pruned.contains(t), "trial {trial}: term {t} pruned at m={}", it.model_size);
            }
        }
    }
}

#[test]
fn evidence_pick_dominates_stable_set_when_pooled() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut compared = 0;
    for _ in 0..20 {
        let k = design15(100, &mut rng);
        let (_, y) = planted(&k, 3, 0.05, &mut rng);
        let params = CsParams::for_dictionary_size(15);
        let out = cs_search(&y, &k, &params).unwrap();
        let star = out.model_star.mask.indices();
        let pooled = out
            .all_top_models
            .iter()
            .any(|r| r.masks.iter().take(params.t).any(|m| m.indices() == star));
        let one = out.model_one.log_evidence.unwrap();
        // Argmax over the pool.
        let problem = SearchProblem::new(&y, &k).unwrap();
        for r in &out.all_top_models {
            for m in r.masks.iter().take(params.t) {
                assert!(problem.projection().log_evidence(&m.indices()) <= one + 1e-9);
            }
        }
        if pooled {
            compared += 1;
            assert!(one >= out.model_star.log_evidence.unwrap() - 1e-9);
        }
    }
    assert!(compared > 0);
}

#[test]
fn cs_top_models_beat_every_excluded_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let k = design15(50, &mut rng);
    let (_, y) = planted(&k, 2, 0.5, &mut rng);
    let params = CsParams { m_max: 3, s: 4, t: 6, c_min: 0.75 };
    let out = cs_search(&y, &k, &params).unwrap();
    // Sizes 1 and 2 are ranked before any pruning takes effect.
    for ranked in out.all_top_models.iter().take(2) {
        let naive = naive_ranking(&y, &k, ranked.model_size);
        let kept: Vec<Vec<usize>> = ranked.masks.iter().map(|m| m.indices()).collect();
        let worst = ranked.scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let yty = SearchProblem::new(&y, &k).unwrap().projection().yty();
        for (rss, idx) in &naive {
            if !kept.contains(idx) {
                assert!(1.0 - rss / yty <= worst + 1e-12);
            }
        }
    }
}

#[test]
fn bsr_recovers_a_single_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let k = design15(100, &mut rng);
    let j = 4;
    let y: Vec<f64> = k.column(j).iter().map(|v| 2.5 * v + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
    let out = bsr_fit_traced(&y, &k).unwrap();

    let problem = SearchProblem::new(&y, &k).unwrap();
    let proj = problem.projection();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for m in 1..=2 {
        for idx in combinations(15, m) {
            let ev = proj.log_evidence(&idx);
            if ev > best.0 {
                best = (ev, idx);
            }
        }
    }
    assert_eq!(best.1, vec![j]);
    assert_eq!(out.fit.mask.indices(), vec![j]);
}

#[test]
fn bsr_stays_small_on_pure_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let trials = 50;
    let mut small = 0;
    for _ in 0..trials {
        let k = design15(100, &mut rng);
        let y = noise(100, &mut rng);
        if bsr_fit_traced(&y, &k).unwrap().fit.mask.size() <= 1 {
            small += 1;
        }
    }
    assert!(small * 5 >= trials * 4, "{small}/{trials}");
}

#[test]
fn bsr_never_beats_exhaustive_search() {
    let dict = build_dictionary(2, 3, 3);
    assert!(dict.len() <= 12);
    let p = dict.len();
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let k = evaluate_dictionary(&rows, &dict).unwrap();
        let (_, y) = planted(&k, 2, 0.2, &mut rng);
        let out = bsr_fit_traced(&y, &k).unwrap();
        let problem = SearchProblem::new(&y, &k).unwrap();
        let proj = problem.projection();
        let mut global = f64::NEG_INFINITY;
        for bits in 1u32..(1 << p) {
            let idx: Vec<usize> = (0..p).filter(|j| bits >> j & 1 == 1).collect();
            global = global.max(proj.log_evidence(&idx));
        }
        let got = out.fit.log_evidence.unwrap();
        assert!(got <= global + 1e-9);
        assert!((got - proj.log_evidence(&out.fit.mask.indices())).abs() <= 1e-9);
    }
}

#[test]
fn bsr_first_step_is_the_best_singleton_and_trace_rises() {
    let mut rng = ChaCha8Rng::seed_from_u64(121);
    for _ in 0..10 {
        let k = design15(80, &mut rng);
        let (_, y) = planted(&k, 3, 0.2, &mut rng);
        let out = bsr_fit_traced(&y, &k).unwrap();
        let problem = SearchProblem::new(&y, &k).unwrap();
        let proj = problem.projection();
        let mut best = (0, f64::NEG_INFINITY);
        for j in 0..15 {
            let ev = proj.log_evidence(&[j]);
            if ev > best.1 {
                best = (j, ev);
            }
        }
        let first = &out.trace[0];
        assert_eq!(first.action, StepAction::Add);
        assert_eq!(first.term, best.0);
        let mut prev = out.initial_log_evidence;
        for step in &out.trace {
            assert!(step.log_evidence > prev);
            prev = step.log_evidence;
        }
        assert!(!out.step_cap_reached);
    }
}
