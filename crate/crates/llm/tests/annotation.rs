use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use annoteval_core::{AnnotatedDocument, MtSystem, PredictedAnnotation, Typology};
use annoteval_llm::*;
use proptest::prelude::*;

const TABLE: &str = "| Phrase | Erreur | Code | Explication |\n|---|---|---|---|\n| 1 | contes du peuple | LA-TL-INS | calque |\n| 2 | focusse | TR-SI-TL | anglicisme |\n";

const FAST: RetryPolicy = RetryPolicy {
    max_attempts: 4,
    backoff_base_ms: 0,
    backoff_max_ms: 0,
};

fn doc(id: &str) -> AnnotatedDocument {
    let target = "Les contes du peuple sont anciens. Elle se focusse sur l'analyse.";
    AnnotatedDocument {
        doc_id: id.into(),
        mt_system: MtSystem::DeepL,
        source_text: "Folk tales are old. It focuses on analysis.".into(),
        target_text: target.into(),
        sentences: annoteval_core::split_sentences(target),
        source_sentences: None,
        reference_errors: vec![],
    }
}

fn chain(id: &str) -> PromptChain {
    build_chain(&doc(id), &Typology::bundled(), None, PromptVariant::Long).unwrap()
}

/// Answers "ok" to every step but the last, which gets `table`. The first
/// `failures` calls fail with `error`.
struct Stub {
    table: String,
    failures: u32,
    error: ProviderError,
    calls: AtomicU32,
    sent_docs: Mutex<Vec<String>>,
}

impl Stub {
    fn new(table: &str) -> Stub {
        Stub {
            table: table.into(),
            failures: 0,
            error: ProviderError::Fatal(String::new()),
            calls: AtomicU32::new(0),
            sent_docs: Mutex::new(Vec::new()),
        }
    }

    fn failing(mut self, n: u32, error: ProviderError) -> Stub {
        self.failures = n;
        self.error = error;
        self
    }
}

impl ChatProvider for Stub {
    fn provider_id(&self) -> &str {
        "stub"
    }
    fn model_id(&self) -> &str {
        "stub-model"
    }
    fn send(&self, r: &ChatRequest<'_>) -> Result<ChatReply, ProviderError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
            return Err(self.error.clone());
        }
        assert_eq!(
            r.messages.len(),
            2 * r.step + 1,
            "history accumulates within the conversation"
        );
        if r.step == 0 {
            self.sent_docs.lock().unwrap().push(r.doc_id.to_string());
        }
        let content = if r.step == 3 {
            self.table.clone()
        } else {
            format!("ok {}", r.step + 1)
        };
        Ok(ChatReply {
            content,
            usage: Some(TokenUsage {
                prompt_tokens: 1,
                completion_tokens: 1,
            }),
        })
    }
}

#[test]
fn rate_limited_twice_then_success() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let p = Stub::new(TABLE).failing(
        2,
        ProviderError::Transient {
            status: Some(429),
            message: "rate limit".into(),
        },
    );
    let out = run_annotation(&p, &FAST, &chain("d1"), &store, "run").unwrap();
    assert_eq!(out.transcript.retries(), 2);
    assert_eq!(out.transcript.steps[0].attempts, 3);
    assert_eq!(out.predictions.len(), 2);
    assert_eq!(store.doc_ids().unwrap(), ["d1"]);
    assert_eq!(store.load("d1").unwrap(), out.transcript);
}

#[test]
fn exhausted_retries_report_last_status() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let p = Stub::new(TABLE).failing(
        100,
        ProviderError::Transient {
            status: Some(503),
            message: "down".into(),
        },
    );
    let err = run_annotation(&p, &FAST, &chain("d1"), &store, "run").unwrap_err();
    assert!(matches!(
        err,
        LlmError::ProviderUnavailable {
            status: Some(503),
            attempts: 4,
            ..
        }
    ));
    let t = store.load("d1").unwrap();
    assert!(!t.complete && t.error.is_some());
    assert!(matches!(replay(&store, "d1"), Err(LlmError::Incomplete(_))));
}

#[test]
fn auth_failure_is_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let p = Stub::new(TABLE).failing(1, ProviderError::Auth("401".into()));
    let err = run_annotation(&p, &FAST, &chain("d1"), &store, "run").unwrap_err();
    assert!(matches!(err, LlmError::Auth(_)));
    assert_eq!(p.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn malformed_table_keeps_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let p = Stub::new("Désolé, je ne peux pas produire de tableau.");
    let err = run_annotation(&p, &FAST, &chain("d1"), &store, "run").unwrap_err();
    match err {
        LlmError::ParseFailure { raw, .. } => assert!(raw.contains("Désolé")),
        other => panic!("unexpected {other:?}"),
    }
    let t = store.load("d1").unwrap();
    assert!(t.complete);
    assert_eq!(t.steps.len(), 4);
}

#[test]
fn replay_matches_original_run() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let original = run_annotation(&Stub::new(TABLE), &FAST, &chain("d1"), &store, "run").unwrap();
    let again = replay(&store, "d1").unwrap();
    assert_eq!(again, original);
    assert!(matches!(replay(&store, "nope"), Err(LlmError::NotFound(_))));
}

#[test]
fn corrupted_transcript_fails_integrity_check() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    run_annotation(&Stub::new(TABLE), &FAST, &chain("d1"), &store, "run").unwrap();
    let path = store.path("d1");
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replacen("focusse", "focuse", 1);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(
        replay(&store, "d1"),
        Err(LlmError::Integrity { .. })
    ));
}

#[test]
fn batch_resumes_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let chains: Vec<PromptChain> = ["a", "b", "c"].iter().map(|d| chain(d)).collect();
    let first = Stub::new(TABLE);
    for c in &chains[..2] {
        run_annotation(&first, &FAST, c, &store, "run").unwrap();
    }
    let second = Stub::new(TABLE);
    let opts = BatchOptions {
        max_parallel: 3,
        force: false,
    };
    let items = run_batch(&second, &FAST, &chains, &store, "run", opts);
    assert_eq!(*second.sent_docs.lock().unwrap(), ["c"]);
    let origins: Vec<(&str, Origin)> = items
        .iter()
        .map(|i| (i.doc_id.as_str(), i.origin))
        .collect();
    assert_eq!(
        origins,
        [
            ("a", Origin::Resumed),
            ("b", Origin::Resumed),
            ("c", Origin::Sent)
        ]
    );
    assert!(items
        .iter()
        .all(|i| i.result.as_ref().unwrap().predictions.len() == 2));

    let forced = Stub::new(TABLE);
    run_batch(
        &forced,
        &FAST,
        &chains,
        &store,
        "run",
        BatchOptions {
            max_parallel: 2,
            force: true,
        },
    );
    let mut sent = forced.sent_docs.lock().unwrap().clone();
    sent.sort();
    assert_eq!(sent, ["a", "b", "c"]);
}

#[test]
fn parallel_batch_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let store = TranscriptStore::open(dir.path()).unwrap();
    let ids: Vec<String> = (0..12).map(|i| format!("doc-{i:02}")).collect();
    let chains: Vec<PromptChain> = ids.iter().map(|d| chain(d)).collect();
    let items = run_batch(
        &Stub::new(TABLE),
        &FAST,
        &chains,
        &store,
        "run",
        BatchOptions {
            max_parallel: 4,
            force: false,
        },
    );
    let got: Vec<&str> = items.iter().map(|i| i.doc_id.as_str()).collect();
    assert_eq!(got, ids.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(items.iter().all(|i| i.result.is_ok()));
}

#[test]
fn scripted_provider_runs_offline_without_secrets() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var("ANNOTEVAL_TEST_SECRET", "sk-do-not-store");
    let mut documents = BTreeMap::new();
    documents.insert(
        "d1".to_string(),
        vec!["a".into(), "b".into(), "c".into(), TABLE.to_string()],
    );
    let script_path = dir.path().join("script.json");
    std::fs::write(
        &script_path,
        serde_json::to_string(&Script {
            provider_id: "scripted".into(),
            model: "m".into(),
            documents,
        })
        .unwrap(),
    )
    .unwrap();
    let mut cfg = ProviderConfig::scripted(&script_path);
    cfg.credential_env = Some("ANNOTEVAL_TEST_SECRET".into());
    let provider = cfg.connect().unwrap();
    let store = TranscriptStore::open(dir.path().join("run")).unwrap();
    run_annotation(provider.as_ref(), &cfg.retry, &chain("d1"), &store, "run").unwrap();
    let transcript = std::fs::read_to_string(store.path("d1")).unwrap();
    assert!(!transcript.contains("sk-do-not-store"));
    assert!(!serde_json::to_string(&cfg)
        .unwrap()
        .contains("sk-do-not-store"));
}

fn prediction() -> impl Strategy<Value = PredictedAnnotation> {
    (
        prop::option::of(0usize..50),
        "[A-Za-zéèàç’' ,.|-]{0,20}[A-Za-zéèàç]",
        "[A-Z]{2}(-[A-Z]{2,4}){1,2}",
        prop::option::of("[A-Za-z][A-Za-zé ,.|]{0,30}[a-z]"),
    )
        .prop_map(|(sentence, surface, label, explanation)| {
            let mut p = PredictedAnnotation::new("doc", sentence, surface.trim(), &label);
            p.explanation = explanation;
            p
        })
        .prop_filter("surface must not read as a no-error marker", |p| {
            !p.surface.is_empty()
        })
}

proptest! {
    #[test]
    fn table_round_trip(preds in prop::collection::vec(prediction(), 0..15)) {
        let back = parse_annotation_table(&render_annotation_table(&preds), "doc").unwrap();
        prop_assert_eq!(back.predictions, preds);
        prop_assert!(back.diagnostics.is_empty());
    }
}
