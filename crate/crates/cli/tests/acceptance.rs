//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any fail.
//!
//! Tolerances and time budgets are pinned below.

use std::collections::{BTreeMap, BTreeSet};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use forestquiz::engine::{simulate_many, Next, Policy};
use forestquiz::features::{apply_bins, fit_bins, LdaParams, Normalization, TopicModel};
use forestquiz::forest::{loocv, Node};
use forestquiz::pipeline::{build_features, TrainConfig};
use forestquiz::quizkit::{compile_quiz, validate_quiz, Overrides};
use forestquiz::stats::{accuracy_report, engagement_stats, Cutoff, Scored};
use forestquiz::synth::{
    feature_pool, fruit_forest, planted_topic_corpus, random_forest, surrogate_corpus, SurrogateParams,
};
use forestquiz::{Bin, Execution, FeatureId, Forest, QuestionBank, QuizRunner, QuizSpec, RawMatrix};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

const IDENTITY_TOL: f64 = 0.001;
const RATIO_TOL: f64 = 0.5;
const SURROGATE_MIN_ACCURACY: f64 = 0.75;
const BASELINE_BAND: (f64, f64) = (0.45, 0.56);
const OCCUPANCY_TOL: f64 = 1.0;
const MAX_INTERNAL_NODES: usize = 49;
const TOPIC_COSINE_MIN: f64 = 0.8;
const NORMALIZATION_TOL: f64 = 1e-9;

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Duration, Check); 10] = [
        ("fruit-tree fidelity", Duration::from_secs(1), fruit_tree_fidelity),
        ("accuracy identity", Duration::from_secs(1), accuracy_identity),
        ("engagement ratio", Duration::from_secs(1), engagement_ratio),
        ("surrogate corpus LOOCV", Duration::from_secs(120), surrogate_loocv),
        ("discretization oracle", Duration::from_secs(10), discretization_oracle),
        ("quiz compilation soundness", Duration::from_secs(60), quiz_soundness),
        ("engine/forest equivalence", Duration::from_secs(30), engine_forest_equivalence),
        ("LDA recovery", Duration::from_secs(60), lda_recovery),
        ("service durability and equivalence", Duration::from_secs(30), service_durability),
        ("end-to-end determinism", Duration::from_secs(180), end_to_end),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = t.elapsed();
        let outcome = match outcome {
            Ok(d) if took > budget => Err(format!("{d}; over budget")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("{tag} {name}: {detail} [{:.2}s / {}s]", took.as_secs_f64(), budget.as_secs());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn choice_for(q: &forestquiz::quizkit::Question, bin: u8) -> usize {
    q.choices.iter().position(|c| c.bin.get() == bin).expect("every bin has a choice")
}

fn fruit_tree_fidelity() -> Result<String, String> {
    let forest = fruit_forest(7);
    let (spec, _) = compile_quiz(&forest, &QuestionBank::builtin(), &Overrides::new(), None).map_err(|e| e.to_string())?;
    let runner = QuizRunner::new(spec).map_err(|e| e.to_string())?;
    let word = FeatureId::word;
    let cook = FeatureId::hashtag("cook");
    // (answers, expected overweight)
    let paths: Vec<(Vec<(FeatureId, u8)>, bool)> = vec![
        (vec![(word("fruit"), 0), (cook.clone(), 0)], true),
        (vec![(word("fruit"), 0), (cook.clone(), 1), (word("curry"), 2)], true),
        (vec![(word("fruit"), 0), (cook.clone(), 1), (word("curry"), 1)], false),
        (vec![(word("fruit"), 0), (cook.clone(), 1), (word("curry"), 0)], false),
        (vec![(word("fruit"), 2), (word("brunch"), 2)], true),
        (vec![(word("fruit"), 2), (word("brunch"), 1)], false),
        (vec![(word("fruit"), 2), (word("brunch"), 0)], false),
    ];
    for (answers, expected) in &paths {
        let want: BTreeMap<FeatureId, u8> = answers.iter().cloned().collect();
        let mut s = runner.start("fidelity", 0);
        let mut asked = Vec::new();
        while let Next::Ask(q) = runner.next_question(&s) {
            let bin = *want
                .get(&q.feature)
                .ok_or_else(|| format!("{answers:?}: asked off-path {}", q.feature))?;
            asked.push(q.feature.clone());
            let qid = q.id.clone();
            let c = choice_for(q, bin);
            runner.answer(&mut s, &qid, c, 0).map_err(|e| e.to_string())?;
        }
        let order: Vec<FeatureId> = answers.iter().map(|(f, _)| f.clone()).collect();
        ensure(asked == order, || format!("{answers:?}: asked {asked:?}"))?;
        let vote = runner.predict_session(&s).map_err(|e| e.to_string())?;
        ensure(vote.label == *expected && vote.votes_total == 7 && (vote.votes_true == 7 || vote.votes_true == 0), || {
            format!("{answers:?}: {vote:?}")
        })?;
        let map: BTreeMap<FeatureId, Bin> = answers.iter().map(|(f, b)| (f.clone(), Bin::new(*b).unwrap())).collect();
        ensure(forest.predict(&map) == vote, || format!("{answers:?}: forest disagrees"))?;
    }
    ensure(runner.spec().questions[0].text == "How often do you eat fruit?", || {
        format!("first question is {:?}", runner.spec().questions[0].text)
    })?;
    Ok(format!("{} leaf paths reproduced, unanimous 7-tree votes", paths.len()))
}

struct Rec {
    bmi: f64,
    predicted: bool,
    commented: bool,
}

impl Scored for Rec {
    fn bmi(&self) -> Option<f64> {
        Some(self.bmi)
    }
    fn predicted(&self) -> bool {
        self.predicted
    }
    fn tie(&self) -> bool {
        false
    }
    fn commented(&self) -> bool {
        self.commented
    }
}

/// `n` records of one BMI class, `correct` of them predicted right and the
/// first `comments` of each group commenting.
fn class(overweight: bool, n: usize, correct: usize, comments_right: usize, comments_wrong: usize) -> Vec<Rec> {
    let bmi = if overweight { 31.0 } else { 22.0 };
    (0..n)
        .map(|i| {
            let right = i < correct;
            let k = if right { i } else { i - correct };
            Rec {
                bmi,
                predicted: if right { overweight } else { !overweight },
                commented: k < if right { comments_right } else { comments_wrong },
            }
        })
        .collect()
}

fn accuracy_identity() -> Result<String, String> {
    // 17.7% overweight at 16.0% class accuracy, 82.3% not at 92.2%.
    let (n_pos, n_neg) = (177, 823);
    let (c_pos, c_neg) = ((0.160 * n_pos as f64).round() as usize, (0.922 * n_neg as f64).round() as usize);
    let mut recs = class(true, n_pos, c_pos, 0, 0);
    recs.extend(class(false, n_neg, c_neg, 0, 0));
    let r = accuracy_report(&recs, &Cutoff::new(28.7)).map_err(|e| e.to_string())?;
    ensure((r.overall - 0.787).abs() <= IDENTITY_TOL, || format!("overall {}", r.overall))?;
    ensure((r.positive.proportion - 0.177).abs() < 1e-12, || format!("{:?}", r.positive))?;
    ensure((r.positive.accuracy.unwrap() - 0.160).abs() < 0.005, || format!("{:?}", r.positive))?;
    ensure((r.negative.accuracy.unwrap() - 0.922).abs() < 0.005, || format!("{:?}", r.negative))?;
    ensure(r.identity_residual().abs() < 1e-12, || format!("residual {}", r.identity_residual()))?;
    Ok(format!("overall {:.4} ({c_pos}/{n_pos} + {c_neg}/{n_neg})", r.overall))
}

fn engagement_ratio() -> Result<String, String> {
    // 744 correct with 3 comments, 201 incorrect with 13.
    let recs = class(false, 945, 744, 3, 13);
    let e = engagement_stats(&recs, &Cutoff::new(28.7));
    let pct = |x: Option<f64>| x.map(|x| (x * 10000.0).round() / 100.0);
    ensure((e.n_correct, e.commented_correct, e.n_incorrect, e.commented_incorrect) == (744, 3, 201, 13), || {
        format!("{e:?}")
    })?;
    ensure(pct(e.rate_correct) == Some(0.40) && pct(e.rate_incorrect) == Some(6.47), || format!("{e:?}"))?;
    let ratio = e.ratio.ok_or("no ratio")?;
    ensure((ratio - 16.0).abs() <= RATIO_TOL, || format!("ratio {ratio}"))?;
    Ok(format!("rates 0.40% / 6.47%, ratio {ratio:.2}"))
}

fn surrogate_loocv() -> Result<String, String> {
    let mut worst = f64::INFINITY;
    let mut seen = Vec::new();
    for seed in 0..10 {
        let s = surrogate_corpus(&SurrogateParams { seed, ..SurrogateParams::default() });
        let (corpus, labels) = s.load().map_err(|e| e.to_string())?;
        let mut cfg = TrainConfig::default();
        cfg.forest.seed = seed;
        let f = build_features(&corpus, &labels, &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
        let r = loocv(&f.matrix, &f.labels, &cfg.forest, Execution::Parallel).map_err(|e| e.to_string())?;
        ensure(r.accuracy >= SURROGATE_MIN_ACCURACY, || format!("seed {seed}: accuracy {:.4}", r.accuracy))?;
        ensure((BASELINE_BAND.0..=BASELINE_BAND.1).contains(&r.majority_baseline), || {
            format!("seed {seed}: baseline {:.4}", r.majority_baseline)
        })?;
        ensure(r.accuracy > r.majority_baseline + 0.15, || format!("seed {seed}: no margin over baseline"))?;
        worst = worst.min(r.accuracy);
        seen.push(r.accuracy);
    }
    let mean = seen.iter().sum::<f64>() / seen.len() as f64;
    Ok(format!("10 seeds, min {worst:.4}, mean {mean:.4}, baseline 26/51"))
}

/// Nearest-rank tertiles by counting ranks, no sorting.
fn rank_oracle(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let pick = |rank: usize| {
        *values
            .iter()
            .find(|&&v| {
                let below = values.iter().filter(|&&u| u < v).count();
                let at_most = values.iter().filter(|&&u| u <= v).count();
                below <= rank && rank < at_most
            })
            .unwrap()
    };
    (pick((n - 1) / 3), pick(2 * (n - 1) / 3))
}

fn column(values: &[f64]) -> RawMatrix {
    RawMatrix {
        communities: (0..values.len()).map(|i| format!("c{i}")).collect(),
        features: vec![FeatureId::word("x")],
        values: values.iter().map(|&v| vec![v]).collect(),
    }
}

fn discretization_oracle() -> Result<String, String> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut distinct_checked = 0;
    for i in 0..1000 {
        let n = rng.random_range(3..=120);
        // Alternate tie-heavy integer vectors with continuous ones.
        let vals: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| f64::from(rng.random_range(0..15u32))).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let raw = column(&vals);
        let space = fit_bins(&raw, 1, Normalization::RawCount);
        let (lo, hi) = rank_oracle(&vals);
        let t = space.features[0].thresholds;
        ensure((t.low, t.high) == (lo, hi), || format!("vector {i}: {t:?} vs ({lo}, {hi})"))?;
        let binned = apply_bins(&raw, &space);
        let mut occ = [0usize; 3];
        for (row, &v) in binned.bins.iter().zip(&vals) {
            let want = if v <= lo { 0 } else if v <= hi { 1 } else { 2 };
            ensure(row[0].get() == want, || format!("vector {i}: {v} binned {}", row[0]))?;
            occ[want as usize] += 1;
        }
        let distinct = vals.iter().map(|v| v.to_bits()).collect::<BTreeSet<_>>().len() == n;
        if distinct {
            distinct_checked += 1;
            for c in occ {
                ensure((c as f64 - n as f64 / 3.0).abs() <= OCCUPANCY_TOL, || format!("vector {i} (n={n}): {occ:?}"))?;
            }
        }
    }
    Ok(format!("1000 vectors match, {distinct_checked} distinct-valued within ±1 of n/3"))
}

/// Features a tree tests on its way to a leaf under complete answers.
fn path_features(tree: &Node, answers: &BTreeMap<FeatureId, Bin>, out: &mut BTreeSet<FeatureId>) {
    let mut node = tree;
    while let Node::Split { feature, threshold, no, yes } = node {
        out.insert(feature.clone());
        node = if answers[feature].get() > *threshold { yes } else { no };
    }
}

fn quiz_soundness() -> Result<String, String> {
    let bank = QuestionBank::builtin();
    let pool = feature_pool(48);
    let mut max_q = 0;
    for seed in 0..100 {
        let forest = random_forest(seed, 7, 3, &pool);
        let (spec, _) = compile_quiz(&forest, &bank, &Overrides::new(), None).map_err(|e| e.to_string())?;
        let report = validate_quiz(&spec, &forest);
        ensure(report.pass(), || format!("forest {seed}: {:?}", report.failures))?;
        let distinct = forest.features().len();
        let internal = forest.internal_nodes();
        ensure(spec.questions.len() == distinct, || format!("forest {seed}: {} questions", spec.questions.len()))?;
        ensure(distinct <= internal && internal <= MAX_INTERNAL_NODES, || format!("forest {seed}: {distinct}/{internal}"))?;
        max_q = max_q.max(distinct);
        let bound = forest.trees.iter().map(Node::depth).sum::<usize>().min(distinct);
        let runner = QuizRunner::new(spec).map_err(|e| e.to_string())?;
        for s in simulate_many(&runner, &Policy::Uniform, 1000, seed, Execution::Parallel) {
            let asked: Vec<&FeatureId> = s
                .transcript
                .iter()
                .map(|e| &runner.question(&e.question_id).unwrap().feature)
                .collect();
            let unique: BTreeSet<&FeatureId> = asked.iter().copied().collect();
            ensure(unique.len() == asked.len(), || format!("forest {seed}: repeated feature"))?;
            ensure(asked.len() <= bound, || format!("forest {seed}: {} questions > {bound}", asked.len()))?;
            let mut needed = BTreeSet::new();
            for t in &forest.trees {
                path_features(t, &s.answers, &mut needed);
            }
            ensure(unique.into_iter().cloned().collect::<BTreeSet<_>>() == needed, || {
                format!("forest {seed}: asked off the realized paths")
            })?;
        }
    }
    Ok(format!("100 forests x 1000 sessions, up to {max_q} questions"))
}

fn engine_forest_equivalence() -> Result<String, String> {
    let pool = feature_pool(30);
    let mut n = 0;
    for seed in 0..10 {
        let forest = random_forest(1000 + seed, 7, 3, &pool);
        let (spec, _) = compile_quiz(&forest, &QuestionBank::builtin(), &Overrides::new(), None).map_err(|e| e.to_string())?;
        let runner = QuizRunner::new(spec).map_err(|e| e.to_string())?;
        for s in simulate_many(&runner, &Policy::Uniform, 1000, seed, Execution::Parallel) {
            let v = runner.predict_session(&s).map_err(|e| e.to_string())?;
            ensure(v == forest.predict(&s.answers), || format!("forest {seed}: {v:?}"))?;
            ensure(v.votes_total == 7, || format!("{} votes", v.votes_total))?;
            n += 1;
        }
    }
    Ok(format!("{n} sessions agree, 7 votes each"))
}

fn lda_recovery() -> Result<String, String> {
    let mut worst = f64::INFINITY;
    for seed in 0..3 {
        let planted = planted_topic_corpus(seed, 200, 40);
        let params = LdaParams {
            topics: 2,
            alpha: 0.5,
            beta: 0.01,
            iterations: 200,
            seed: seed + 100,
        };
        let a = TopicModel::train(planted.docs.clone(), planted.vocab.clone(), params).map_err(|e| e.to_string())?;
        let b = TopicModel::train(planted.docs.clone(), planted.vocab.clone(), params).map_err(|e| e.to_string())?;
        let sims = planted.matched_cosines(&a.phi);
        ensure(sims.iter().all(|&s| s >= TOPIC_COSINE_MIN), || format!("seed {seed}: cosines {sims:?}"))?;
        worst = sims.iter().copied().fold(worst, f64::min);
        for row in a.phi.iter().chain(&a.theta) {
            let sum: f64 = row.iter().sum();
            ensure((sum - 1.0).abs() <= NORMALIZATION_TOL && row.iter().all(|&x| x >= 0.0), || {
                format!("seed {seed}: row sums to {sum}")
            })?;
        }
        let bits = |m: &TopicModel| m.phi.iter().chain(&m.theta).flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(bits(&a) == bits(&b), || format!("seed {seed}: reruns differ"))?;
    }
    Ok(format!("3 planted corpora, min matched cosine {worst:.4}, reruns bit-identical"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_forestquiz"))
}

struct Server {
    child: Child,
    base: String,
    http: reqwest::blocking::Client,
}

impl Server {
    fn start(quiz: &Path, data: &Path, port: u16) -> Result<Server, String> {
        let child = bin()
            .args(["serve", "--quiz"])
            .arg(quiz)
            .arg("--data-dir")
            .arg(data)
            .args(["--bind", &format!("127.0.0.1:{port}")])
            .env("FORESTQUIZ_EXPORT_SALT", "acceptance")
            .env_remove("FORESTQUIZ_ADMIN_TOKEN")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let srv = Server {
            child,
            base: format!("http://127.0.0.1:{port}"),
            http: reqwest::blocking::Client::new(),
        };
        let deadline = Instant::now() + Duration::from_secs(10);
        while srv.http.get(format!("{}/api/sessions/x/next", srv.base)).send().is_err() {
            if Instant::now() > deadline {
                return Err("server did not start".into());
            }
            std::thread::sleep(Duration::from_millis(25));
        }
        Ok(srv)
    }

    fn create(&self) -> String {
        let v: Value = self.http.post(format!("{}/api/sessions", self.base)).send().unwrap().json().unwrap();
        v["session_id"].as_str().unwrap().to_string()
    }

    fn next(&self, id: &str) -> Option<String> {
        let v: Value = self.http.get(format!("{}/api/sessions/{id}/next", self.base)).send().unwrap().json().unwrap();
        v["question"]["id"].as_str().map(str::to_string)
    }

    fn answer(&self, id: &str, q: &str, c: usize) -> u16 {
        answer_with(&self.http, &self.base, id, q, c)
    }

    fn result(&self, id: &str) -> Value {
        self.http.get(format!("{}/api/sessions/{id}/result", self.base)).send().unwrap().json().unwrap()
    }
}

fn answer_with(http: &reqwest::blocking::Client, base: &str, id: &str, q: &str, c: usize) -> u16 {
    http.post(format!("{base}/api/sessions/{id}/answers"))
        .json(&json!({"question_id": q, "choice_index": c}))
        .send()
        .unwrap()
        .status()
        .as_u16()
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn service_durability() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let forest = random_forest(77, 7, 3, &feature_pool(24));
    let (spec, _) = compile_quiz(&forest, &QuestionBank::builtin(), &Overrides::new(), None).map_err(|e| e.to_string())?;
    let quiz = dir.path().join("quiz.json");
    std::fs::write(&quiz, spec.to_json()).map_err(|e| e.to_string())?;
    let runner = QuizRunner::new(QuizSpec::load(&quiz).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut srv = Server::start(&quiz, &data, port)?;

    // Scripted transcripts through the API and straight through the engine.
    let mut acked = 0;
    let mut complete = Vec::new();
    let mut partial = Vec::new();
    for n in 0..20usize {
        let id = srv.create();
        acked += 1;
        let mut local = runner.start("local", 0);
        let mut step = 0;
        loop {
            let remote = srv.next(&id);
            let expected = match runner.next_question(&local) {
                Next::Ask(q) => Some(q.id.clone()),
                Next::Done => None,
            };
            ensure(remote == expected, || format!("session {n} step {step}: {remote:?} vs {expected:?}"))?;
            let Some(q) = remote else { break };
            if n % 4 == 3 && step == 2 {
                partial.push((id.clone(), q));
                break;
            }
            let c = (n * 5 + step) % 3;
            ensure(srv.answer(&id, &q, c) == 200, || format!("session {n}: answer rejected"))?;
            acked += 1;
            runner.answer(&mut local, &q, c, 0).map_err(|e| e.to_string())?;
            step += 1;
        }
        if local.is_complete() {
            let v = runner.predict_session(&local).unwrap();
            let r = srv.result(&id);
            let want = json!({
                "prediction": if v.label { "overweight" } else { "not_overweight" },
                "votes_true": v.votes_true,
                "votes_total": v.votes_total,
            });
            ensure(r == want, || format!("session {n}: {r} vs {want}"))?;
            complete.push((id, r));
        }
    }

    // Two clients race the same answer.
    let mut races = 0;
    for _ in 0..20 {
        let id = srv.create();
        acked += 1;
        let q = srv.next(&id).unwrap();
        let codes: Vec<u16> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..2)
                .map(|c| {
                    let (base, id, q) = (srv.base.clone(), id.clone(), q.clone());
                    s.spawn(move || answer_with(&reqwest::blocking::Client::new(), &base, &id, &q, c))
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut sorted = codes.clone();
        sorted.sort();
        ensure(sorted == [200, 409], || format!("race gave {codes:?}"))?;
        acked += 1;
        races += 1;
    }

    srv.child.kill().map_err(|e| e.to_string())?;
    srv.child.wait().map_err(|e| e.to_string())?;
    let log = std::fs::read_to_string(data.join("events.jsonl")).map_err(|e| e.to_string())?;
    ensure(log.lines().count() == acked, || format!("{} events logged, {acked} acknowledged", log.lines().count()))?;

    let srv = Server::start(&quiz, &data, port)?;
    for (id, r) in &complete {
        ensure(&srv.result(id) == r, || format!("{id}: result changed after restart"))?;
    }
    for (id, q) in &partial {
        ensure(srv.next(id).as_deref() == Some(q.as_str()), || format!("{id}: progress lost"))?;
    }
    Ok(format!(
        "{} complete + {} partial transcripts match the engine, {acked} events survive SIGKILL, {races} races each one 409",
        complete.len(),
        partial.len()
    ))
}

fn cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = bin().args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
}

fn pipeline(root: &Path, name: &str, extra: &[&str]) -> Result<PathBuf, String> {
    let d = root.join(name);
    std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
    let run = |args: &[&str]| {
        let mut a = args.to_vec();
        a.extend_from_slice(extra);
        cli(&a, &d)
    };
    run(&["synth", "--seed", "11", "--out-dir", "data"])?;
    run(&["train", "--corpus", "data/corpus.jsonl", "--labels", "data/labels.csv", "--seed", "7", "--out-dir", "model"])?;
    run(&["compile-quiz", "--forest", "model/forest.json", "--featurespace", "model/featurespace.json", "--out-dir", "quiz"])?;
    run(&["simulate", "--quiz", "quiz/quiz.json", "--n", "1000", "--seed", "7", "--out-dir", "sim"])?;
    run(&["eval", "--records", "sim/records.jsonl", "--out-dir", "eval"])?;
    Ok(d)
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = files(&pipeline(dir.path(), "a", &[])?);
    let b = files(&pipeline(dir.path(), "b", &[])?);
    let c = files(&pipeline(dir.path(), "c", &["--sequential"])?);
    ensure(a.len() >= 14, || format!("only {} artifacts", a.len()))?;
    for (other, label) in [(&b, "rerun"), (&c, "--sequential")] {
        ensure(a.keys().eq(other.keys()), || format!("{label}: different artifact sets"))?;
        for (k, v) in &a {
            ensure(&other[k] == v, || format!("{label}: {} differs", k.display()))?;
        }
    }
    let forest: Forest = serde_json::from_slice(&a[Path::new("model/forest.json")]).map_err(|e| e.to_string())?;
    ensure(forest.trees.len() == 7, || "forest does not have 7 trees".into())?;
    Ok(format!("{} artifacts byte-identical across 2 runs and --sequential", a.len()))
}
