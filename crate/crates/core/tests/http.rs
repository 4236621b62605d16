#[path = "support/stub.rs"]
mod stub;

use tripcraft_core::gateway::{BackendError, BackendHandle, CompletionParams, HttpConfig, PromptBundle, Role};

fn prompt(text: &str) -> PromptBundle {
    PromptBundle {
        role: Role::Planner,
        text: text.into(),
        shot_count: 0,
        shot_ids: Vec::new(),
        stream: "planner/q1".into(),
    }
}

fn client(url: &str) -> HttpConfig {
    let mut c = HttpConfig::new(url, "test-model");
    c.backoff_ms = 1;
    c.max_attempts = 3;
    c
}

#[test]
fn server_errors_are_retried_with_fresh_request_ids() {
    let s = stub::serve(vec![(503, "busy".into()), (200, stub::completion("Day 1:"))]);
    std::env::set_var("TRIPCRAFT_TEST_KEY", "sk-test");
    let mut cfg = client(&s.url);
    cfg.api_key_env = Some("TRIPCRAFT_TEST_KEY".into());
    let params = CompletionParams {
        seed: Some(11),
        temperature: 0.3,
        max_tokens: 900,
    };
    let b = BackendHandle::http(cfg).unwrap().with_params(params);
    assert_eq!(b.complete(&prompt("plan it")).unwrap(), "Day 1:");

    let seen = s.seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    let ids: Vec<&str> = seen.iter().map(|r| r.header("X-Request-Id").unwrap()).collect();
    assert_ne!(ids[0], ids[1]);
    assert_eq!(seen[1].header("Authorization"), Some("Bearer sk-test"));
    let body = &seen[1].body;
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "plan it");
    assert_eq!(body["seed"], 11);
    assert_eq!(body["temperature"], 0.3);
    assert_eq!(body["max_tokens"], 900);
}

#[test]
fn client_errors_are_not_retried() {
    let s = stub::serve(vec![(400, "bad request".into())]);
    let b = BackendHandle::http(client(&s.url)).unwrap();
    match b.complete(&prompt("x")) {
        Err(BackendError::Status { status: 400, retriable: false, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(s.seen.lock().unwrap().len(), 1);
}

#[test]
fn retries_stop_at_the_attempt_limit() {
    let s = stub::serve(vec![(429, "slow down".into())]);
    let b = BackendHandle::http(client(&s.url)).unwrap();
    assert!(matches!(b.complete(&prompt("x")), Err(BackendError::Status { status: 429, .. })));
    assert_eq!(s.seen.lock().unwrap().len(), 3);
}

#[test]
fn missing_content_is_malformed() {
    let s = stub::serve(vec![(200, r#"{"choices":[]}"#.into())]);
    let b = BackendHandle::http(client(&s.url)).unwrap();
    assert!(matches!(b.complete(&prompt("x")), Err(BackendError::Malformed(_))));
}

#[test]
fn unset_credential_variable_is_an_error() {
    let mut cfg = client("http://127.0.0.1:9/");
    cfg.api_key_env = Some("TRIPCRAFT_SURELY_UNSET".into());
    assert!(matches!(BackendHandle::http(cfg), Err(BackendError::Transport(_))));
}

#[test]
fn recorded_http_replies_replay_offline() {
    let s = stub::serve(vec![(200, stub::completion("first")), (200, stub::completion("second"))]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("planner.jsonl");
    let rec = BackendHandle::record(BackendHandle::http(client(&s.url)).unwrap(), &path).unwrap();
    assert_eq!(rec.complete(&prompt("a")).unwrap(), "first");
    assert_eq!(rec.complete(&prompt("b")).unwrap(), "second");
    drop(rec);

    let replay = BackendHandle::replay(&path).unwrap();
    assert_eq!(replay.complete(&prompt("b")).unwrap(), "second");
    assert_eq!(replay.complete(&prompt("a")).unwrap(), "first");
    assert!(matches!(replay.complete(&prompt("c")), Err(BackendError::TranscriptMiss(_))));
    assert_eq!(s.seen.lock().unwrap().len(), 2);
}
