use std::path::{Path, PathBuf};

use forestquiz::corpus::{load_documents, load_labels, HashtagFilter, LoadReport};
use forestquiz::engine::{simulate_many, Policy};
use forestquiz::features::{CountConfig, LdaParams, Normalization};
use forestquiz::fingerprint::{self, Provenance};
use forestquiz::forest::{loocv, ForestParams, LoocvReport, SplitCriterion};
use forestquiz::pipeline::{build_features, train, TrainConfig};
use forestquiz::quizkit::{compile_quiz, load_overrides, validate_quiz, Overrides};
use forestquiz::stats::{
    accuracy_report, demographics_summary, engagement_stats, read_export, AccuracyReport, Cutoff, Demographics,
    EngagementStats, RespondentRecord,
};
use forestquiz::synth::{simulated_respondent, surrogate_corpus, SurrogateParams};
use forestquiz::{seed, Execution, Forest, QuestionBank, QuizRunner, QuizSpec};
use forestquiz_service::ServiceConfig;
use serde::Serialize;
use serde_json::json;

use crate::failure::Failure;
use crate::{
    Cli, Command, CompileArgs, CriterionArg, EvalArgs, NormalizationArg, ServeArgs, SimulateArgs, SynthArgs, TrainArgs,
    ValidateArgs,
};

/// Salt for the demographics of simulated respondents, who have no handles.
const SIMULATION_SALT: &str = "simulation";

pub fn run(cli: Cli) -> Result<(), Failure> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Train(a) => cmd_train(&a, exec, true),
        Command::Loocv(a) => cmd_train(&a, exec, false),
        Command::CompileQuiz(a) => cmd_compile(&a),
        Command::ValidateQuiz(a) => cmd_validate(&a),
        Command::Serve(a) => cmd_serve(a),
        Command::Simulate(a) => cmd_simulate(&a, exec),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
    std::fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write(path, text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn require(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::io(path, "no such file"))
    }
}

/// One JSON line on stdout naming what a command wrote.
fn summary(command: &str, outputs: &[PathBuf], extra: serde_json::Value) {
    let mut v = json!({
        "command": command,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    println!("{v}");
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        count: CountConfig {
            min_count: a.min_count,
            normalization: match a.normalization {
                NormalizationArg::RelativeFrequency => Normalization::RelativeFrequency,
                NormalizationArg::RawCount => Normalization::RawCount,
            },
        },
        lda: (a.topics > 0).then(|| {
            let mut p = LdaParams::with_topics(a.topics);
            if let Some(alpha) = a.lda_alpha {
                p.alpha = alpha;
            }
            p.beta = a.lda_beta;
            p.iterations = a.lda_iterations;
            p.seed = seed::derive(a.seed, &[u64::MAX]);
            p
        }),
        forest: ForestParams {
            n_trees: a.trees,
            max_depth: a.max_depth,
            feature_subsample: a.feature_subsample,
            bootstrap: !a.no_bootstrap,
            seed: a.seed,
            criterion: match a.criterion {
                CriterionArg::Gini => SplitCriterion::Gini,
                CriterionArg::InfoGain => SplitCriterion::InfoGain,
            },
        },
    }
}

#[derive(Serialize)]
struct LoocvArtifact<'a> {
    provenance: Provenance,
    corpus: &'a LoadReport,
    #[serde(flatten)]
    report: &'a LoocvReport,
}

fn cmd_train(a: &TrainArgs, exec: Execution, fit: bool) -> Result<(), Failure> {
    require(&a.corpus)?;
    require(&a.labels)?;
    ensure_dir(&a.out.out_dir)?;
    let config = train_config(a);
    // The hashtag filter and tie rule shape the data, so they count as configuration.
    let provenance = Provenance::new(a.seed, &(&config, &a.hashtags, a.median_tie_positive));
    let labels = load_labels(&a.labels, a.median_tie_positive)?;
    let (corpus, load) = load_documents(&a.corpus, &HashtagFilter::new(&a.hashtags), &labels)?;
    if !load.rejects.is_empty() {
        log::warn!("{} lines name communities missing from the labels", load.rejects.len());
    }
    if !load.empty_communities.is_empty() {
        log::warn!("communities without admitted posts: {}", load.empty_communities.join(", "));
    }
    let dir = &a.out.out_dir;
    let mut outputs = Vec::new();

    let report = if fit {
        let mut t = train(&corpus, &labels, &config, !a.no_loocv, exec)?;
        t.forest.provenance = Some(provenance.clone());
        t.features.space.provenance = Some(provenance.clone());
        outputs.push(write(dir.join("forest.json"), t.forest.to_json() + "\n")?);
        outputs.push(write_json(dir.join("featurespace.json"), &t.features.space)?);
        t.loocv
    } else {
        let f = build_features(&corpus, &labels, &config, exec)?;
        Some(loocv(&f.matrix, &f.labels, &config.forest, exec).map_err(|e| Failure::validation(e.to_string()))?)
    };
    let mut extra = json!({ "seed": a.seed, "kept": load.kept, "discarded": load.discarded });
    if let Some(r) = &report {
        outputs.push(write_json(
            dir.join("loocv.json"),
            &LoocvArtifact {
                provenance,
                corpus: &load,
                report: r,
            },
        )?);
        extra["loocv_accuracy"] = json!(r.accuracy);
        extra["majority_baseline"] = json!(r.majority_baseline);
    }
    summary(if fit { "train" } else { "loocv" }, &outputs, extra);
    Ok(())
}

fn cmd_compile(a: &CompileArgs) -> Result<(), Failure> {
    require(&a.forest)?;
    ensure_dir(&a.out.out_dir)?;
    let forest: Forest = read_json(&a.forest)?;
    let space = a.featurespace.as_deref().map(read_json).transpose()?;
    let bank = match &a.templates {
        Some(p) => QuestionBank::load(p)?,
        None => QuestionBank::builtin(),
    };
    let overrides = match &a.overrides {
        Some(p) => load_overrides(p)?,
        None => Overrides::new(),
    };
    let (spec, report) = compile_quiz(&forest, &bank, &overrides, space.as_ref())?;
    let coverage = validate_quiz(&spec, &forest);
    if !coverage.pass() {
        return Err(Failure::validation(format!(
            "compiled quiz fails coverage: {}",
            serde_json::to_string(&coverage.failures).expect("serializes")
        )));
    }
    let dir = &a.out.out_dir;
    let outputs = vec![
        write(dir.join("quiz.json"), spec.to_json() + "\n")?,
        write_json(dir.join("draft_report.json"), &report)?,
    ];
    summary(
        "compile-quiz",
        &outputs,
        json!({
            "questions": spec.questions.len(),
            "internal_nodes": spec.internal_nodes(),
            "needs_review": report.needs_review.len(),
        }),
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    require(&a.quiz)?;
    require(&a.forest)?;
    ensure_dir(&a.out.out_dir)?;
    let spec = QuizSpec::load(&a.quiz)?;
    let forest: Forest = read_json(&a.forest)?;
    let report = validate_quiz(&spec, &forest);
    let out = write_json(a.out.out_dir.join("coverage.json"), &report)?;
    if !report.pass() {
        return Err(Failure::validation(format!(
            "{} coverage failures, see {}",
            report.failures.len(),
            out.display()
        )));
    }
    summary("validate-quiz", &[out], json!({ "pass": true }));
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), Failure> {
    require(&a.quiz)?;
    if a.export_salt.is_empty() {
        return Err(Failure::usage("export salt must not be empty"));
    }
    let config = ServiceConfig {
        bind: a.bind,
        quiz: a.quiz,
        forest: a.forest,
        data_dir: a.data_dir,
        cutoff: Cutoff::new(a.cutoff),
        admin_token: a.admin_token.filter(|t| !t.is_empty()),
        export_salt: a.export_salt,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new(crate::failure::Kind::Io, e.to_string()))?;
    rt.block_on(forestquiz_service::serve(config))?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateArtifact {
    provenance: Provenance,
    quiz_fingerprint: String,
    sessions: usize,
    records: usize,
}

fn cmd_simulate(a: &SimulateArgs, exec: Execution) -> Result<(), Failure> {
    require(&a.quiz)?;
    ensure_dir(&a.out.out_dir)?;
    let policy: Policy = a.policy.parse().map_err(Failure::usage)?;
    let spec = QuizSpec::load(&a.quiz)?;
    let runner = QuizRunner::new(spec).map_err(|e| Failure::validation(e.to_string()))?;
    let cutoff = Cutoff::new(a.cutoff);
    let sessions = simulate_many(&runner, &policy, a.n, a.seed, exec);
    let mut lines = String::new();
    let mut n = 0;
    for (i, s) in sessions.iter().enumerate() {
        let input = simulated_respondent(seed::derive(a.seed, &[i as u64, 1]));
        let d = Demographics::from_intake(&input, SIMULATION_SALT).map_err(|e| Failure::validation(e.to_string()))?;
        let r = RespondentRecord::new(s, d, &cutoff).map_err(|e| Failure::validation(e.to_string()))?;
        lines.push_str(&serde_json::to_string(&r).expect("records serialize"));
        lines.push('\n');
        n += 1;
    }
    let dir = &a.out.out_dir;
    let outputs = vec![
        write(dir.join("records.jsonl"), lines)?,
        write_json(
            dir.join("simulate.json"),
            &SimulateArtifact {
                provenance: Provenance::new(a.seed, &(&policy, a.n, a.cutoff, runner.fingerprint())),
                quiz_fingerprint: runner.fingerprint().to_string(),
                sessions: sessions.len(),
                records: n,
            },
        )?,
    ];
    summary("simulate", &outputs, json!({ "sessions": n, "seed": a.seed }));
    Ok(())
}

#[derive(Serialize)]
struct EvalArtifact<'a, T> {
    source_fingerprint: &'a str,
    cutoff: Cutoff,
    #[serde(flatten)]
    report: &'a T,
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let path = a.records.as_ref().or(a.export.as_ref()).expect("clap requires one");
    require(path)?;
    ensure_dir(&a.out.out_dir)?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let source = fingerprint::of_bytes(text.as_bytes());
    let cutoff = Cutoff::new(a.cutoff);
    let dir = &a.out.out_dir;
    let mut outputs = Vec::new();
    let (accuracy, engagement): (AccuracyReport, EngagementStats) = if a.records.is_some() {
        let records: Vec<RespondentRecord> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Failure::validation(format!("{} line {}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        let tables = demographics_summary(&records);
        outputs.extend(tables.write_all(dir).map_err(|e| Failure::io(dir, e))?);
        (
            accuracy_report(&records, &cutoff).map_err(|e| Failure::validation(e.to_string()))?,
            engagement_stats(&records, &cutoff),
        )
    } else {
        let rows = read_export(&text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        (
            accuracy_report(&rows, &cutoff).map_err(|e| Failure::validation(e.to_string()))?,
            engagement_stats(&rows, &cutoff),
        )
    };
    outputs.push(write_json(
        dir.join("accuracy.json"),
        &EvalArtifact {
            source_fingerprint: &source,
            cutoff,
            report: &accuracy,
        },
    )?);
    outputs.push(write_json(
        dir.join("engagement.json"),
        &EvalArtifact {
            source_fingerprint: &source,
            cutoff,
            report: &engagement,
        },
    )?);
    summary(
        "eval",
        &outputs,
        json!({ "overall": accuracy.overall, "scored": accuracy.n_scored, "identity_residual": accuracy.identity_residual() }),
    );
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Failure> {
    if a.communities < 2 || a.docs == 0 || a.tokens_per_doc == 0 || a.planted + a.noise == 0 {
        return Err(Failure::usage("synth needs ≥ 2 communities, ≥ 1 document, ≥ 1 token per document and a vocabulary"));
    }
    let params = SurrogateParams {
        communities: a.communities,
        planted: a.planted,
        noise: a.noise,
        docs_per_community: a.docs,
        tokens_per_doc: a.tokens_per_doc,
        signal: a.signal,
        seed: a.seed,
        ..SurrogateParams::default()
    };
    let dir = &a.out.out_dir;
    ensure_dir(dir)?;
    let s = surrogate_corpus(&params);
    s.write_dir(dir).map_err(|e| Failure::io(dir, e))?;
    let meta = write_json(
        dir.join("synth.json"),
        &json!({ "provenance": Provenance::new(a.seed, &params), "params": params }),
    )?;
    summary(
        "synth",
        &[dir.join("corpus.jsonl"), dir.join("labels.csv"), meta],
        json!({ "communities": s.rates.len(), "documents": s.documents.len() }),
    );
    Ok(())
}
