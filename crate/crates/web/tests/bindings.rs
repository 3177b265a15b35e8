use alp_web::{market_accepts, pump_curve_json, Lab};
use serde_json::Value;

const PULSE_C: &str = "1 V 3 1 1\n V 3 0 10";

#[test]
fn lab_runs_and_keeps_its_clock() {
    let mut lab = Lab::open("run2").unwrap();
    let out: Value = serde_json::from_str(&lab.execute(PULSE_C).unwrap()).unwrap();
    let time = out["time"].as_array().unwrap();
    assert_eq!(time.len(), 111);
    assert_eq!(out["pressure"].as_array().unwrap().len(), time.len());
    assert_eq!(out["qcm"].as_array().unwrap().len(), time.len());
    assert!(out["narrative"].as_str().unwrap().contains("open valve 3"));
    assert!(out["failure"].is_null());
    assert!((lab.clock() - 11.0).abs() < 1e-9);

    lab.execute(PULSE_C).unwrap();
    assert!((lab.clock() - 22.0).abs() < 1e-9);
}

#[test]
fn lab_reports_bad_input() {
    assert!(Lab::open("run9").is_err());
    let mut lab = Lab::open("run1").unwrap();
    let err = lab.execute("1 V 3 1 1\n X 3 0 10").unwrap_err();
    assert!(err.contains("line 2"), "{err}");
    let err = lab.execute("1 T 1 2000 1").unwrap_err();
    assert!(err.starts_with("refused"), "{err}");
    assert_eq!(lab.clock(), 0.0);
}

#[test]
fn pump_curve_is_monotone_from_base_pressure() {
    let out: Value = serde_json::from_str(&pump_curve_json("run2", 400.0).unwrap()).unwrap();
    let p: Vec<f64> = out["pressure"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(p.len(), 101);
    assert_eq!(p[0], out["base_pressure"].as_f64().unwrap());
    assert!(p.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn market_defaults_to_m_and_p() {
    assert!(market_accepts("chess", "").unwrap());
    assert!(!market_accepts("apple", "").unwrap());
    assert!(market_accepts("apple", "z").unwrap());
    assert!(market_accepts("apple", "3").is_err());
}

#[test]
fn page_default_recipe_runs() {
    let page = include_str!("../www/index.html");
    let start = page.find("<textarea id=\"recipe\">").unwrap() + "<textarea id=\"recipe\">".len();
    let end = start + page[start..].find("</textarea>").unwrap();
    let mut lab = Lab::open("run2").unwrap();
    let out: Value = serde_json::from_str(&lab.execute(&page[start..end]).unwrap()).unwrap();
    assert!(out["failure"].is_null());
    let qcm = out["qcm"].as_array().unwrap();
    assert!(qcm.last().unwrap().as_f64().unwrap() > qcm[0].as_f64().unwrap());
}
