use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use forestquiz::engine::{Next, StepClock};
use forestquiz::quizkit::{compile_quiz, Overrides};
use forestquiz::stats::{read_export, Cutoff};
use forestquiz::synth::{feature_pool, fruit_forest, random_forest};
use forestquiz::{Forest, QuestionBank, QuizRunner};
use forestquiz_service::events::EventLog;
use forestquiz_service::{open_state, router, AppState, SequentialIds, ServiceConfig};
use serde_json::{json, Value};

const TOKEN: &str = "let-me-in";

fn write_quiz(dir: &Path, forest: &Forest) -> std::path::PathBuf {
    let (spec, _) = compile_quiz(forest, &QuestionBank::builtin(), &Overrides::new(), None).unwrap();
    let p = dir.join("quiz.json");
    std::fs::write(&p, spec.to_json()).unwrap();
    p
}

fn config(dir: &Path, forest: &Forest) -> ServiceConfig {
    ServiceConfig {
        bind: "127.0.0.1:0".parse().unwrap(),
        quiz: write_quiz(dir, forest),
        forest: None,
        data_dir: dir.join("data"),
        cutoff: Cutoff::default(),
        admin_token: Some(TOKEN.into()),
        export_salt: "salt".into(),
    }
}

fn state(cfg: &ServiceConfig) -> AppState {
    open_state(cfg, Arc::new(StepClock::new(0, 1000)), Arc::new(SequentialIds::new("s"))).unwrap()
}

struct Server {
    base: String,
    client: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Server {
    async fn start(state: AppState) -> Server {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let task = tokio::spawn(async move {
            axum::serve(listener, router(state)).await.unwrap();
        });
        Server {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            task,
        }
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn create(&self) -> String {
        let (status, body) = self.post("/api/sessions", json!({})).await;
        assert_eq!(status, 201);
        body["session_id"].as_str().unwrap().to_string()
    }

    async fn next_id(&self, sid: &str) -> Option<String> {
        let (_, body) = self.get(&format!("/api/sessions/{sid}/next")).await;
        body["question"]["id"].as_str().map(str::to_string)
    }

    async fn answer(&self, sid: &str, qid: &str, choice: usize) -> (u16, Value) {
        self.post(&format!("/api/sessions/{sid}/answers"), json!({"question_id": qid, "choice_index": choice}))
            .await
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

#[tokio::test]
async fn endpoint_contract() {
    let dir = tempfile::tempdir().unwrap();
    let srv = Server::start(state(&config(dir.path(), &fruit_forest(1)))).await;

    let sid = srv.create().await;
    let (status, body) = srv.get(&format!("/api/sessions/{sid}/next")).await;
    assert_eq!(status, 200);
    assert_eq!(body["question"]["text"], "How often do you eat fruit?");
    assert_eq!(body["question"]["choices"], json!(["Practically never", "Sometimes", "Often"]));
    let fruit = body["question"]["id"].as_str().unwrap().to_string();

    assert_eq!(srv.get("/api/sessions/nope/next").await.0, 404);
    assert_eq!(srv.answer("nope", &fruit, 0).await.0, 404);
    assert_eq!(srv.answer(&sid, &fruit, 5).await.0, 422);
    assert_eq!(srv.answer(&sid, "q_000000000000", 0).await.0, 422);
    let (status, body) = srv.get(&format!("/api/sessions/{sid}/result")).await;
    assert_eq!((status, body["error"].as_str()), (409, Some("incomplete")));
    let (status, body) = srv.post(&format!("/api/sessions/{sid}/demographics"), json!({})).await;
    assert_eq!((status, body["error"].as_str()), (409, Some("incomplete")));

    assert_eq!(srv.answer(&sid, &fruit, 0).await, (200, json!({"accepted": true, "complete": false})));
    assert_eq!(srv.answer(&sid, &fruit, 0).await.0, 409);
    let cook = srv.next_id(&sid).await.unwrap();
    assert_eq!(srv.answer(&sid, &cook, 0).await, (200, json!({"accepted": true, "complete": true})));
    assert_eq!(srv.get(&format!("/api/sessions/{sid}/next")).await.1, json!({"done": true}));
    assert_eq!(srv.answer(&sid, &cook, 1).await.0, 409);
    assert_eq!(
        srv.get(&format!("/api/sessions/{sid}/result")).await,
        (200, json!({"prediction": "overweight", "votes_true": 1, "votes_total": 1}))
    );

    let path = format!("/api/sessions/{sid}/demographics");
    assert_eq!(srv.post(&path, json!({"weight": 1000.0, "height": 1.8, "units": "metric"})).await.0, 422);
    let (status, body) = srv.post(&path, json!({"weight": 74.4, "height": 1.73, "units": "metric"})).await;
    assert_eq!(status, 200);
    assert!((body["bmi"].as_f64().unwrap() - 24.86).abs() < 0.005);
    assert_eq!(body["agreed"], false);
    assert_eq!(srv.post(&path, json!({})).await.0, 409);

    // A not-overweight path agrees with a normal BMI; an empty form is fine.
    let sid2 = srv.create().await;
    let q = srv.next_id(&sid2).await.unwrap();
    srv.answer(&sid2, &q, 2).await;
    let q = srv.next_id(&sid2).await.unwrap();
    srv.answer(&sid2, &q, 0).await;
    assert_eq!(srv.get(&format!("/api/sessions/{sid2}/result")).await.1["prediction"], "not_overweight");
    let (status, body) = srv
        .post(&format!("/api/sessions/{sid2}/demographics"), json!({"weight": 74.4, "height": 1.73, "units": "metric"}))
        .await;
    assert_eq!((status, &body["agreed"]), (200, &json!(true)));
    let sid3 = srv.create().await;
    for _ in 0..3 {
        if let Some(q) = srv.next_id(&sid3).await {
            srv.answer(&sid3, &q, 1).await;
        }
    }
    assert_eq!(srv.post(&format!("/api/sessions/{sid3}/demographics"), json!({})).await, (200, json!({})));

    let r = srv.client.get(format!("{}/api/admin/export", srv.base)).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 401);
    let r = srv
        .client
        .get(format!("{}/api/admin/export", srv.base))
        .bearer_auth("wrong")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 401);
    let r = srv.client.get(format!("{}/api/admin/export", srv.base)).bearer_auth(TOKEN).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let rows = read_export(&r.text().await.unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| !r.respondent.starts_with("s-")));
}

#[tokio::test]
async fn empty_export() {
    let dir = tempfile::tempdir().unwrap();
    let srv = Server::start(state(&config(dir.path(), &fruit_forest(1)))).await;
    let r = srv.client.get(format!("{}/api/admin/export", srv.base)).bearer_auth(TOKEN).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(r.text().await.unwrap(), "");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_creation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &fruit_forest(1));
    let srv = Arc::new(Server::start(open_state(&cfg, Arc::new(StepClock::new(0, 1)), Arc::new(forestquiz_service::UuidIds)).unwrap()).await);
    let tasks: Vec<_> = (0..100)
        .map(|_| {
            let srv = srv.clone();
            tokio::spawn(async move { srv.create().await })
        })
        .collect();
    let mut ids = BTreeSet::new();
    for t in tasks {
        ids.insert(t.await.unwrap());
    }
    assert_eq!(ids.len(), 100);
    let (_, events) = EventLog::open(&cfg.data_dir.join("events.jsonl")).unwrap();
    assert_eq!(events.len(), 100);
    let logged: BTreeSet<String> = events.iter().map(|e| e.session_id().to_string()).collect();
    assert_eq!(logged, ids);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_duplicate_answers() {
    let dir = tempfile::tempdir().unwrap();
    let srv = Arc::new(Server::start(state(&config(dir.path(), &fruit_forest(1)))).await);
    for _ in 0..30 {
        let sid = srv.create().await;
        let qid = srv.next_id(&sid).await.unwrap();
        let a = {
            let (srv, sid, qid) = (srv.clone(), sid.clone(), qid.clone());
            tokio::spawn(async move { srv.answer(&sid, &qid, 1).await.0 })
        };
        let b = {
            let (srv, sid, qid) = (srv.clone(), sid.clone(), qid.clone());
            tokio::spawn(async move { srv.answer(&sid, &qid, 2).await.0 })
        };
        let mut codes = [a.await.unwrap(), b.await.unwrap()];
        codes.sort();
        assert_eq!(codes, [200, 409]);
    }
}

#[tokio::test]
async fn api_matches_engine() {
    let dir = tempfile::tempdir().unwrap();
    let forest = random_forest(5, 7, 3, &feature_pool(24));
    let cfg = config(dir.path(), &forest);
    let st = state(&cfg);
    let store = st.store.clone();
    let srv = Server::start(st).await;

    let (spec, _) = compile_quiz(&forest, &QuestionBank::builtin(), &Overrides::new(), None).unwrap();
    let runner = QuizRunner::new(spec).unwrap();
    let clock = StepClock::new(0, 1000);
    use forestquiz::engine::Clock;
    for n in 0..25usize {
        let sid = srv.create().await;
        let mut direct = runner.start(sid.clone(), clock.now_ms());
        let mut k = n;
        while let Some(qid) = srv.next_id(&sid).await {
            let Next::Ask(q) = runner.next_question(&direct) else { panic!("engine finished first") };
            assert_eq!(q.id, qid);
            let choice = k % 3;
            k = k / 3 + n;
            assert_eq!(srv.answer(&sid, &qid, choice).await.0, 200);
            runner.answer(&mut direct, &qid, choice, clock.now_ms()).unwrap();
        }
        let served = store.snapshot(&sid).await.unwrap().session;
        assert_eq!(serde_json::to_string(&served).unwrap(), serde_json::to_string(&direct).unwrap());
        let (_, result) = srv.get(&format!("/api/sessions/{sid}/result")).await;
        let vote = forest.predict(&direct.answers);
        assert_eq!(result["votes_true"], vote.votes_true);
        assert_eq!(result["votes_total"], 7);
    }
}

#[tokio::test]
async fn kill_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &random_forest(9, 7, 3, &feature_pool(24)));
    let st = state(&cfg);
    let store = st.store.clone();
    let srv = Server::start(st).await;
    let mut ids = Vec::new();
    for n in 0..12usize {
        let sid = srv.create().await;
        // Leave some sessions part-way through.
        let mut steps = 0;
        while let Some(q) = srv.next_id(&sid).await {
            if n % 3 == 0 && steps == 2 {
                break;
            }
            assert_eq!(srv.answer(&sid, &q, (n + steps) % 3).await.0, 200);
            steps += 1;
        }
        if n % 2 == 0 {
            srv.post(
                &format!("/api/sessions/{sid}/demographics"),
                json!({"weight": 60 + n, "height": 1.7, "twitter": "@x", "comment": "hi"}),
            )
            .await;
        }
        ids.push(sid);
    }
    let mut before = Vec::new();
    for id in &ids {
        before.push(store.snapshot(id).await.unwrap());
    }
    let records_before = store.records().await;
    // Abrupt stop: no shutdown hook runs.
    drop(srv);
    drop(store);
    // A torn write from the moment of the crash.
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().append(true).open(cfg.data_dir.join("events.jsonl")).unwrap();
    f.write_all(br#"{"event":"answer_rec"#).unwrap();
    drop(f);

    let st = state(&cfg);
    for (id, b) in ids.iter().zip(&before) {
        assert_eq!(&st.store.snapshot(id).await.unwrap(), b);
    }
    assert_eq!(st.store.records().await, records_before);
    assert_eq!(st.store.len(), ids.len());
}
