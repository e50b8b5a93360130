use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rqcsim::circuit::{random_circuit, Circuit, RandomCircuitConfig};
use rqcsim::cluster::ClusterSpec;
use serde_json::Value;
use tempfile::TempDir;

fn rqcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqcsim")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn circuit_file(dir: &TempDir, name: &str, n: usize, cycles: usize, seed: u64) -> PathBuf {
    write(dir, name, &random_circuit(&RandomCircuitConfig::new(n, cycles, seed)).to_json())
}

fn cluster_file(dir: &TempDir, name: &str, nodes: usize, dpn: usize, device_mem: u64) -> PathBuf {
    let spec = ClusterSpec { device_mem, ..ClusterSpec::new(nodes, dpn) };
    write(dir, name, &serde_json::to_string(&spec).unwrap())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trivial_plan_has_no_slices() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "c.json", &Circuit::empty(2).to_json());
    let out = dir.path().join("plan.json");
    let r = rqcsim(&["plan", "--circuit", s(&c), "--mem-limit", "1024", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(json(&out)["sliced_edges"].as_array().unwrap().len(), 0);
    let summary: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(summary["cost"]["flops"].is_number());
}

#[test]
fn tight_memory_slices_and_respects_the_cap() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 12, 8, 4);
    let zeros = "0".repeat(12);
    let loose = dir.path().join("loose.json");
    let r = rqcsim(&["plan", "--circuit", s(&c), "--bitstring", &zeros, "--mem-limit", "1000000000", "--out", s(&loose)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(json(&loose)["sliced_edges"].as_array().unwrap().is_empty());
    let cap = json(&loose)["cost"]["max_elements"].as_u64().unwrap() * 8 / 4;
    let tight = dir.path().join("tight.json");
    let r = rqcsim(&["plan", "--circuit", s(&c), "--bitstring", &zeros, "--mem-limit", &cap.to_string(), "--out", s(&tight)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let plan = json(&tight);
    assert!(!plan["sliced_edges"].as_array().unwrap().is_empty());
    assert!(plan["cost"]["max_elements"].as_u64().unwrap() * 8 <= cap);

    let report = dir.path().join("run.json");
    let r = rqcsim(&["run", "--circuit", s(&c), "--bitstring", &zeros, "--plan", s(&tight), "--out", s(&report)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let oracle = rqcsim(&["oracle", "--circuit", s(&c), "--bitstrings", &zeros]);
    let want: Value = serde_json::from_slice(&oracle.stdout).unwrap();
    let got = &json(&report)["amplitudes"][0];
    for part in ["re", "im"] {
        assert!((got[part].as_f64().unwrap() - want["amplitudes"][0][part].as_f64().unwrap()).abs() < 1e-5);
    }
}

#[test]
fn plans_are_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 10, 6, 1);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        assert_eq!(code(&rqcsim(&["plan", "--circuit", s(&c), "--seed", "7", "--iters", "50", "--mem-limit", "65536", "--out", s(out)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn infeasible_memory_limit_exits_2() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 8, 4, 1);
    let r = rqcsim(&["plan", "--circuit", s(&c), "--mem-limit", "64"]);
    assert_eq!(code(&r), 2, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn usage_and_input_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&rqcsim(&["plan"])), 1);
    assert_eq!(code(&rqcsim(&["frobnicate"])), 1);
    let bad = write(&dir, "bad.json", "{ not json");
    assert_eq!(code(&rqcsim(&["plan", "--circuit", s(&bad)])), 1);
    let c = circuit_file(&dir, "c.json", 4, 2, 1);
    assert_eq!(code(&rqcsim(&["run", "--circuit", s(&c), "--quant", "int3"])), 1);
    assert_eq!(code(&rqcsim(&["oracle", "--circuit", s(&c), "--bitstrings", "01"])), 1);
    assert_eq!(code(&rqcsim(&["--help"])), 0);
}

#[test]
fn verified_run_has_unit_fidelity_and_stable_reports() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 10, 6, 2);
    let k = cluster_file(&dir, "k.json", 2, 2, 2048);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let r = rqcsim(&["run", "--circuit", s(&c), "--cluster", s(&k), "--mem-limit", "65536", "--verify", "--out", s(out)]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rep = json(&a);
    assert!((rep["report"]["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(rep["config"]["cluster"]["nodes"], 2);
    assert_eq!(rep["config"]["verify"], true);
    assert!(rep["report"]["bytes_inter"].as_u64().unwrap() > 0, "the run should communicate");
}

#[test]
fn int4_inter_traffic_reports_its_rate() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 10, 6, 3);
    let k = cluster_file(&dir, "k.json", 2, 1, 4096);
    let out = dir.path().join("r.json");
    let r = rqcsim(&["run", "--circuit", s(&c), "--cluster", s(&k), "--mem-limit", "65536", "--quant", "int4:128", "--verify", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let rep = json(&out);
    assert!((rep["report"]["inter_cr"].as_f64().unwrap() - 14.0625).abs() < 1e-9);

    let strict = rqcsim(&["run", "--circuit", s(&c), "--cluster", s(&k), "--mem-limit", "65536", "--quant", "int4:128", "--verify", "--min-fidelity", "1.0", "--out", s(&out)]);
    assert_eq!(code(&strict), 3);
    assert!(json(&out)["report"]["fidelity"].as_f64().unwrap() < 1.0);
}

#[test]
fn cluster_shape_does_not_change_the_result() {
    let dir = TempDir::new().unwrap();
    let c = circuit_file(&dir, "c.json", 10, 6, 5);
    let big = cluster_file(&dir, "big.json", 2, 2, 2048);
    let hashes: Vec<Value> = [Some(&big), None]
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let out = dir.path().join(format!("r{i}.json"));
            let mut args = vec!["run", "--circuit", s(&c), "--mem-limit", "65536", "--seed", "3", "--out", s(&out)];
            if let Some(k) = k {
                args.extend(["--cluster", s(k)]);
            }
            assert_eq!(code(&rqcsim(&args)), 0);
            json(&out)["result_hash"].clone()
        })
        .collect();
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn oracle_amplitudes() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "e.json", &Circuit::empty(3).to_json());
    let r = rqcsim(&["oracle", "--circuit", s(&empty), "--bitstrings", "000"]);
    assert_eq!(code(&r), 0);
    let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(doc["amplitudes"][0]["re"], 1.0);
    assert_eq!(doc["amplitudes"][0]["im"], 0.0);

    let c = circuit_file(&dir, "c.json", 10, 6, 6);
    let all = dir.path().join("all.json");
    assert_eq!(code(&rqcsim(&["oracle", "--circuit", s(&c), "--out", s(&all)])), 0);
    let amps = json(&all)["amplitudes"].as_array().unwrap().clone();
    assert_eq!(amps.len(), 1024);
    let norm: f64 = amps.iter().map(|a| a["re"].as_f64().unwrap().powi(2) + a["im"].as_f64().unwrap().powi(2)).sum();
    assert!((norm - 1.0).abs() < 1e-9);

    let picks = "0000000000,1011001110,1111111111,0101010101";
    let run = dir.path().join("run.json");
    assert_eq!(code(&rqcsim(&["run", "--circuit", s(&c), "--mem-limit", "65536", "--bitstrings", picks, "--out", s(&run)])), 0);
    let ran = json(&run)["amplitudes"].as_array().unwrap().clone();
    for a in &ran {
        let x = usize::from_str_radix(a["bitstring"].as_str().unwrap(), 2).unwrap();
        for part in ["re", "im"] {
            assert!((a[part].as_f64().unwrap() - amps[x][part].as_f64().unwrap()).abs() < 1e-5);
        }
    }
}

#[test]
fn quant_sweep_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.json");
    assert_eq!(code(&rqcsim(&["quant-sweep", "--seed", "1", "--out", s(&out)])), 0);
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    let crs: Vec<f64> = rows.iter().map(|r| r["cr"].as_f64().unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!((crs[0] - 50.0).abs() < 0.01 && (crs[1] - 25.0).abs() < 0.01 && (crs[2] - 14.0625).abs() < 1e-9, "{crs:?}");

    let constant = rqcsim(&["quant-sweep", "--source", "constant", "--log-elements", "10"]);
    let doc: Value = serde_json::from_slice(&constant.stdout).unwrap();
    for r in doc["rows"].as_array().unwrap() {
        assert_eq!(r["fidelity"], 1.0);
    }

    let c = circuit_file(&dir, "c.json", 8, 4, 1);
    let state = rqcsim(&["quant-sweep", "--circuit", s(&c), "--quant", "int8,int4:32"]);
    assert_eq!(code(&state), 0);
    let doc: Value = serde_json::from_slice(&state.stdout).unwrap();
    assert_eq!(doc["elements"], 256);
    assert_eq!(code(&rqcsim(&["quant-sweep", "--quant", "none"])), 1);
}

#[test]
fn gaussian_fidelity_falls_with_coarser_schemes() {
    use rqcsim::cli::{cmd_quant_sweep, Source, SweepArgs};
    let dir = TempDir::new().unwrap();
    let mut ordered = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let args = SweepArgs {
            circuit: None,
            source: Source::Gaussian,
            seed,
            log_elements: 12,
            quant: vec!["half".into(), "int8".into(), "int4:128".into()],
            out: Some(dir.path().join("s.json")),
        };
        let doc = cmd_quant_sweep(&args).unwrap();
        let f: Vec<f64> = doc["rows"].as_array().unwrap().iter().map(|r| r["fidelity"].as_f64().unwrap()).collect();
        if f[0] >= f[1] && f[1] >= f[2] {
            ordered += 1;
        }
    }
    assert!(ordered * 10 >= seeds * 8, "{ordered}/{seeds}");
}
