use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use hiqlip::cutnorm::{build_cut_problem, solve, Backend, SolverConfig};
use hiqlip::netio::generate_synthetic;
use hiqlip::Error;
use serde_json::{json, Value};

/// Minimal HTTP/1.1 server answering every request with `handler(body)`.
/// Returns the base URL and a request counter.
fn serve<F>(handler: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(&str, Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let parsed = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let (code, text) = handler(&path, parsed);
            let resp = format!(
                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, hits)
}

fn request_energy(req: &Value, spins: &[i64]) -> f64 {
    let mut e = 0.0;
    for q in req["quadratic"].as_array().unwrap() {
        let (i, j, w) = (q[0].as_u64().unwrap() as usize, q[1].as_u64().unwrap() as usize, q[2].as_f64().unwrap());
        e -= w * (spins[i] * spins[j]) as f64;
    }
    for l in req["linear"].as_array().unwrap() {
        let (i, h) = (l[0].as_u64().unwrap() as usize, l[1].as_f64().unwrap());
        e -= h * spins[i] as f64;
    }
    e
}

fn brute_force(req: &Value) -> (Vec<i64>, f64) {
    let n = req["num_vars"].as_u64().unwrap() as usize;
    let mut best = (vec![1; n], f64::INFINITY);
    for bits in 0u64..(1 << n) {
        let s: Vec<i64> = (0..n).map(|i| if (bits >> i) & 1 == 1 { -1 } else { 1 }).collect();
        let e = request_energy(req, &s);
        if e < best.1 {
            best = (s, e);
        }
    }
    best
}

fn remote_cfg(url: &str) -> SolverConfig {
    SolverConfig {
        backend: Backend::Remote,
        remote_endpoint: Some(url.to_string()),
        timeout_ms: 5000,
        ..Default::default()
    }
}

#[test]
fn remote_solution_matches_exhaustive() {
    let (url, hits) = serve(|path, req| {
        assert_eq!(path, "/v1/solve");
        let (s, e) = brute_force(&req);
        let flipped: Vec<i64> = s.iter().map(|v| -v).collect();
        let ef = request_energy(&req, &flipped);
        (200, json!({"assignments": [flipped, s], "energies": [ef, e]}).to_string())
    });
    for seed in 0..5 {
        let net = generate_synthetic(seed, &[5, 6], 1.0).unwrap();
        let p = build_cut_problem(net.weights(0)).unwrap();
        let remote = solve(&p, &remote_cfg(&url)).unwrap();
        let exact = solve(&p, &SolverConfig::exhaustive()).unwrap();
        assert!((remote.energy - exact.energy).abs() < 1e-9);
    }
    assert_eq!(hits.load(Ordering::SeqCst), 5);
}

#[test]
fn remote_energy_mismatch_rejected() {
    let (url, _) = serve(|_, req| {
        let (s, e) = brute_force(&req);
        (200, json!({"assignments": [s], "energies": [e - 1.0]}).to_string())
    });
    let net = generate_synthetic(1, &[3, 4], 1.0).unwrap();
    let p = build_cut_problem(net.weights(0)).unwrap();
    let err = solve(&p, &remote_cfg(&url)).unwrap_err();
    assert!(matches!(err, Error::Remote(_)), "{err}");
}

#[test]
fn remote_http_error_surfaces() {
    let (url, _) = serve(|_, _| (503, "{}".to_string()));
    let net = generate_synthetic(1, &[3, 4], 1.0).unwrap();
    let p = build_cut_problem(net.weights(0)).unwrap();
    assert!(matches!(solve(&p, &remote_cfg(&url)), Err(Error::Remote(_))));
}

#[test]
fn remote_malformed_body_rejected() {
    let (url, _) = serve(|_, _| (200, "not json".to_string()));
    let net = generate_synthetic(1, &[3, 4], 1.0).unwrap();
    let p = build_cut_problem(net.weights(0)).unwrap();
    assert!(matches!(solve(&p, &remote_cfg(&url)), Err(Error::Remote(_))));
}

#[test]
fn unreachable_endpoint_fails() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let net = generate_synthetic(1, &[3, 4], 1.0).unwrap();
    let p = build_cut_problem(net.weights(0)).unwrap();
    assert!(matches!(solve(&p, &remote_cfg(&url)), Err(Error::Remote(_))));
}
