//! Criteria that drive the HTTP service the way participants would.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use eop_core::domain::{cosine_similarity, dot, LikertLevel, Part};
use eop_core::simulator::{sample_truth, simulate_answer, DEFAULT_CONFIDENCE_THRESHOLD};
use eop_service::session::{PartName, QuestionView};
use eop_service::study::SubmitAnswer;
use eop_service::{http, Service, ServiceConfig, StudyConfig};

use crate::{timed, Outcome};

/// Answers comparisons from fixed weights through the probit model with the
/// confidence rule, reading attributes off the question as displayed.
pub struct Respondent {
    desert: Vec<f64>,
    utility: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Respondent {
    pub fn new(desert: Vec<f64>, utility: Vec<f64>, seed: u64) -> Self {
        Respondent { desert, utility, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn answer(&mut self, view: &QuestionView) -> SubmitAnswer {
        let answer = match view.part {
            PartName::Likert => json!(LikertLevel::Agree),
            PartName::Desert | PartName::Utility => {
                let [a, b] = view.subjects.as_ref().expect("comparisons show two subjects");
                let delta: Vec<f64> =
                    a.attributes.iter().zip(&b.attributes).map(|(p, q)| p.value - q.value).collect();
                let truth = if view.part == PartName::Desert { &self.desert } else { &self.utility };
                json!(simulate_answer(dot(truth, &delta), DEFAULT_CONFIDENCE_THRESHOLD, &mut self.rng).value())
            }
        };
        SubmitAnswer { question_id: view.question_id.clone(), answer, justification: None }
    }
}

#[derive(Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    async fn send(&self, request: reqwest::RequestBuilder) -> Result<Value, String> {
        let response = request.send().await.map_err(|e| e.to_string())?;
        let status = response.status();
        let body: Value = response.json().await.map_err(|e| e.to_string())?;
        if status.is_success() {
            Ok(body)
        } else {
            Err(format!("{status}: {body}"))
        }
    }

    pub async fn create_session(&self, study: &str) -> Result<String, String> {
        let body = self.send(self.http.post(format!("{}/studies/{study}/sessions", self.base))).await?;
        body["session_id"].as_str().map(String::from).ok_or_else(|| format!("no session id in {body}"))
    }

    pub async fn next(&self, session: &str) -> Result<Option<QuestionView>, String> {
        let body = self.send(self.http.get(format!("{}/sessions/{session}/next", self.base))).await?;
        if body["done"] == true {
            return Ok(None);
        }
        serde_json::from_value(body).map(Some).map_err(|e| e.to_string())
    }

    pub async fn submit(&self, session: &str, answer: &SubmitAnswer) -> Result<usize, String> {
        let url = format!("{}/sessions/{session}/answers", self.base);
        let body = self.send(self.http.post(url).json(answer)).await?;
        body["cursor"].as_u64().map(|c| c as usize).ok_or_else(|| format!("no cursor in {body}"))
    }

    pub async fn demographics(&self, session: &str, fields: Value) -> Result<(), String> {
        let url = format!("{}/sessions/{session}/demographics", self.base);
        self.send(self.http.post(url).json(&fields)).await.map(|_| ())
    }

    pub async fn results(&self, study: &str) -> Result<Value, String> {
        self.send(self.http.get(format!("{}/studies/{study}/results", self.base))).await
    }

    /// Answers up to `limit` questions; returns the last acknowledged cursor.
    pub async fn answer(&self, session: &str, who: &mut Respondent, limit: usize) -> Result<usize, String> {
        let mut cursor = 0;
        for _ in 0..limit {
            let Some(view) = self.next(session).await? else { break };
            let acked = self.submit(session, &who.answer(&view)).await?;
            if acked != view.index + 1 {
                return Err(format!("ack {acked} after question {}", view.index));
            }
            cursor = acked;
        }
        Ok(cursor)
    }
}

pub struct Running {
    pub client: Client,
    stop: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

pub async fn start(service: Arc<Service>) -> Running {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("loopback bind");
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(http::serve(service, listener, async {
        let _ = stopped.await;
    }));
    Running { client: Client { http: reqwest::Client::new(), base }, stop, task }
}

impl Running {
    pub async fn shutdown(self) {
        drop(self.client);
        let _ = self.stop.send(());
        self.task.await.expect("server task").expect("server io");
    }
}

/// Session seeds are fixed so a run is reproducible.
fn config(dir: &Path, study: &str) -> ServiceConfig {
    let mut config = StudyConfig::synthetic(study, 2000, 3);
    config.session_seed = Some(1);
    ServiceConfig::new(dir, vec![config])
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("tokio runtime")
}

fn society_cosine(results: &Value, part: &str, truth: &[f64], method: &str) -> f64 {
    let coefficients: Vec<f64> =
        serde_json::from_value(results["aggregates"][part][method]["society_weights"]["coefficients"].clone())
            .unwrap_or_default();
    cosine_similarity(&coefficients, truth).unwrap_or(0.0)
}

/// Twenty simulated participants with a common truth. The service is
/// restarted after the first ten and part way through the eleventh.
pub fn end_to_end() -> Vec<Outcome> {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut truth_rng = ChaCha8Rng::seed_from_u64(42);
    let desert = sample_truth(6, Part::Desert, &mut truth_rng).into_coefficients();
    let utility = sample_truth(7, Part::Utility, &mut truth_rng).into_coefficients();
    let who = |i: u64| Respondent::new(desert.clone(), utility.clone(), 900 + i);
    let rt = runtime();

    let mut durability = None;
    let recovery = timed("end-to-end: 20 simulated participants, average desert cosine", || {
        rt.block_on(async {
            let mut acked: BTreeMap<String, usize> = BTreeMap::new();
            let service = Arc::new(Service::open(&config(dir.path(), "e2e")).expect("open study"));
            let server = start(service.clone()).await;
            for i in 0..10 {
                let session = server.client.create_session("e2e").await.unwrap();
                let cursor = server.client.answer(&session, &mut who(i), usize::MAX).await.unwrap();
                if i % 2 == 0 {
                    server.client.demographics(&session, json!({"gender": "female"})).await.unwrap();
                }
                acked.insert(session, cursor);
            }
            let mut straggler = who(10);
            let pending = server.client.create_session("e2e").await.unwrap();
            let cursor = server.client.answer(&pending, &mut straggler, 20).await.unwrap();
            acked.insert(pending.clone(), cursor);
            server.shutdown().await;
            drop(service);

            let restart = timed("durability: restart mid-study loses no acknowledged write", || {
                match Service::open(&config(dir.path(), "e2e")) {
                    Ok(reopened) => {
                        let lost: Vec<String> = acked
                            .iter()
                            .filter(|(id, &cursor)| reopened.session_status(id).ok().map(|s| s.cursor) != Some(cursor))
                            .map(|(id, _)| id.clone())
                            .collect();
                        (lost.is_empty(), format!("{} sessions checked, {} with lost writes", acked.len(), lost.len()))
                    }
                    Err(e) => (false, format!("reopen failed: {e}")),
                }
            });
            durability = Some(restart);

            let service = Arc::new(Service::open(&config(dir.path(), "e2e")).expect("reopen study"));
            let server = start(service).await;
            server.client.answer(&pending, &mut straggler, usize::MAX).await.unwrap();
            for i in 11..20 {
                let session = server.client.create_session("e2e").await.unwrap();
                server.client.answer(&session, &mut who(i), usize::MAX).await.unwrap();
            }
            let results = server.client.results("e2e").await.unwrap();
            server.shutdown().await;

            let completed = results["completed_sessions"].as_u64().unwrap_or(0);
            let cosine = society_cosine(&results, "desert", &desert, "average");
            let detail = format!(
                "{completed} completed, desert cosine {cosine:.3} (target >= 0.9); \
                 hierarchical desert {:.3}, average utility {:.3}",
                society_cosine(&results, "desert", &desert, "hierarchical"),
                society_cosine(&results, "utility", &utility, "average"),
            );
            (completed == 20 && cosine >= 0.9, detail)
        })
    });
    let mut outcomes = vec![recovery];
    outcomes.extend(durability);
    outcomes
}

/// One hundred sessions answered concurrently over HTTP, then the log is
/// replayed from disk.
pub fn parallel_sessions() -> Outcome {
    timed("100 parallel sessions, replay with zero integrity violations", || {
        let dir = tempfile::tempdir().expect("temp dir");
        let rt = runtime();
        let (errors, sessions) = rt.block_on(async {
            let service = Arc::new(Service::open(&config(dir.path(), "stress")).expect("open study"));
            let server = start(service).await;
            let tasks: Vec<_> = (0..100u64)
                .map(|i| {
                    let client = server.client.clone();
                    tokio::spawn(async move {
                        let mut who = Respondent::new(vec![0.4; 6], vec![0.3; 7], i);
                        let session = client.create_session("stress").await?;
                        let cursor = client.answer(&session, &mut who, usize::MAX).await?;
                        Ok::<_, String>((session, cursor))
                    })
                })
                .collect();
            let mut errors = Vec::new();
            let mut sessions = Vec::new();
            for task in tasks {
                match task.await {
                    Ok(Ok(done)) => sessions.push(done),
                    Ok(Err(e)) => errors.push(e),
                    Err(e) => errors.push(e.to_string()),
                }
            }
            server.shutdown().await;
            (errors, sessions)
        });
        if !errors.is_empty() {
            return (false, format!("{} request failures, first: {}", errors.len(), errors[0]));
        }
        let reopened = match Service::open(&config(dir.path(), "stress")) {
            Ok(s) => s,
            Err(e) => return (false, format!("replay failed: {e}")),
        };
        let incomplete = sessions
            .iter()
            .filter(|(id, cursor)| {
                reopened.session_status(id).ok().map(|s| (s.cursor, s.total_questions)) != Some((*cursor, *cursor))
            })
            .count();
        let lines = std::fs::read_to_string(dir.path().join("stress.jsonl"))
            .map(|t| t.lines().count())
            .unwrap_or(0);
        let expected_lines: usize = sessions.iter().map(|(_, c)| 1 + c).sum();
        let completed = reopened.results("stress").map(|r| r.completed_sessions).unwrap_or(0);
        (
            incomplete == 0 && lines == expected_lines && completed == 100,
            format!(
                "{} sessions replayed, {incomplete} mismatched, {lines}/{expected_lines} log lines, \
                 {completed} completed in results",
                sessions.len()
            ),
        )
    })
}
