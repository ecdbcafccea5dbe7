use std::collections::HashMap;
use std::path::{Path, PathBuf};

use pairsource::cli::run;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn pairsource(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("pairsource").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = pairsource(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

/// Rows of a CSV file as column maps, skipping `#` metadata.
fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("column {key} = `{}`", row[key]))
}

fn metadata(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let prefix = format!("# {key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().to_string()
}

#[test]
fn simulated_sweep_agrees_with_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("oracle.toml");
    let cfg = cfg.to_str().unwrap();
    ok(&["--config", cfg, "--out", out, "predict"]);
    ok(&["--config", cfg, "--out", out, "simulate", "--sweep"]);
    let report = ok(&["--config", cfg, "--out", out, "analyze"]);
    assert!(report.contains("brightness"), "{report}");

    let predicted = read_csv(&dir.path().join("predict.csv"));
    let measured = read_csv(&dir.path().join("heralding.csv"));
    let coinc = read_csv(&dir.path().join("coincidences.csv"));
    assert_eq!(predicted.len(), 3);
    assert_eq!(measured.len(), 3);
    for ((p, m), c) in predicted.iter().zip(&measured).zip(&coinc) {
        assert_eq!(p["power_mw"], m["power_mw"]);
        let t = num(c, "duration_s");
        let n = num(c, "coincidences");
        for (pk, mk, sigma) in [
            ("singles_signal_hz", "singles_signal_hz", (num(p, "singles_signal_hz") / t).sqrt()),
            ("singles_idler_hz", "singles_idler_hz", (num(p, "singles_idler_hz") / t).sqrt()),
            ("herald_signal", "eta_signal", num(p, "herald_signal") / n.sqrt()),
            ("herald_idler", "eta_idler", num(p, "herald_idler") / n.sqrt()),
        ] {
            let z = (num(m, mk) - num(p, pk)) / sigma;
            assert!(z.abs() <= 3.0, "{} mW {mk}: {} vs {} (z {z:.2})", p["power_mw"], num(m, mk), num(p, pk));
        }
    }

    let fit = &read_csv(&dir.path().join("brightness.csv"))[0];
    let slope = num(fit, "slope_hz_per_mw");
    assert!((slope / 1e6 - 1.0).abs() < 0.02, "brightness {slope}");

    let seed = metadata(&dir.path().join("streams.csv"), "seed");
    assert_eq!(seed, "1");
    let sha = metadata(&dir.path().join("predict.csv"), "config_sha256");
    assert_eq!(sha.len(), 64);
}

#[test]
fn analyze_reads_polarization_streams() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = std::fs::read_to_string(configs().join("paper.toml")).unwrap();
    let text = text.replace("route_polarization = false", "").replace("[simulation]", "[simulation]\nroute_polarization = true");
    let cfg = dir.path().join("pam.toml");
    std::fs::write(&cfg, text).unwrap();
    let cfg = cfg.to_str().unwrap();
    ok(&["--config", cfg, "--out", out, "simulate", "--duration-s", "0.02"]);
    ok(&["--config", cfg, "--out", out, "analyze"]);
    let h = &read_csv(&dir.path().join("heralding.csv"))[0];
    assert!(num(h, "eta_signal") > 0.0 && num(h, "eta_idler") > 0.0);
}

#[test]
fn reruns_are_byte_identical_apart_from_metadata() {
    let cfg = configs().join("oracle.toml");
    let cfg = cfg.to_str().unwrap();
    let bodies: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path().to_str().unwrap();
            ok(&["--config", cfg, "--out", out, "--seed", "42", "simulate", "--duration-s", "0.05"]);
            ok(&["--config", cfg, "--out", out, "analyze"]);
            let mut all = std::fs::read_to_string(dir.path().join("stream.txt")).unwrap();
            all.push_str(&std::fs::read_to_string(dir.path().join("coincidences.csv")).unwrap());
            all
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn config_resolution_and_builtin_fallback() {
    // Both cases touch the process environment, so they share one test.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    std::env::remove_var("PAIRSOURCE_CONFIG_DIR");
    ok(&["--out", out, "waist"]);
    assert_eq!(metadata(&dir.path().join("out/waist.csv"), "config"), "<builtin paper.toml>");

    let text = std::fs::read_to_string(configs().join("paper.toml")).unwrap().replace("length_mm = 10.0", "length_mm = 20.0");
    std::fs::write(dir.path().join("pairsource.toml"), text).unwrap();
    std::env::set_var("PAIRSOURCE_CONFIG_DIR", dir.path());
    let report = ok(&["--out", out, "waist"]);
    let found = metadata(&dir.path().join("out/waist.csv"), "config");
    std::env::remove_var("PAIRSOURCE_CONFIG_DIR");
    assert_eq!(Path::new(&found), dir.path().join("pairsource.toml"));
    let row = &read_csv(&dir.path().join("out/waist.csv"))[0];
    assert_eq!(num(row, "length_mm"), 20.0, "{report}");
}

#[test]
fn exit_codes_distinguish_validation_from_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let (code, _, err) = pairsource(&["frobnicate"]);
    assert_eq!(code, 1, "{err}");

    let (code, help, _) = pairsource(&["--help"]);
    assert_eq!(code, 0);
    assert!(help.contains("tuning-curve"));

    let (code, _, err) = pairsource(&["--out", out, "deconvolve", "--measured-ghz", "100", "--filter-ghz", "125"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("filter-limited"), "{err}");

    let missing = dir.path().join("nope.qtt");
    let (code, _, err) = pairsource(&["--out", out, "analyze", "--stream", missing.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn config_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(configs().join("oracle.toml")).unwrap();
    let cases = [
        (base.replace("length_mm = 10.0", "length = 10.0"), "missing unit suffix on `length`"),
        (base.replace("length_mm = 10.0", "length_mm = -1.0"), "length"),
        (base.replace("signal_transmission_frac = 0.1", "signal_transmission_frac = 1.5"), "transmission"),
        (base.replace("signal_detector = \"ideal\"", "signal_detector = \"bolometer\""), "bolometer"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{k}.toml"));
        std::fs::write(&path, text).unwrap();
        let (code, _, err) = pairsource(&["--config", path.to_str().unwrap(), "waist"]);
        assert_eq!(code, 1, "{err}");
        let prefix = format!("error: {}:", path.display());
        assert!(err.starts_with(&prefix), "{err}");
        let line: usize = err[prefix.len()..].split(':').next().unwrap().parse().unwrap();
        assert!(line > 0, "{err}");
        assert!(err.contains(needle), "{err}");
    }
}
