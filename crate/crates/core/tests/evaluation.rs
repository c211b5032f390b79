use codestylo::evaluation::stats::{anova_oneway, brown_forsythe, shapiro_wilk, student_ttest, welch_ttest};
use serde_json::Value;

fn oracle() -> Value {
    serde_json::from_str(include_str!("data/stats_oracle.json")).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn groups(v: &Value) -> Vec<Vec<f64>> {
    v.as_array().unwrap().iter().map(floats).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn t_tests_match_reference() {
    for case in oracle()["welch"].as_array().unwrap() {
        let (a, b) = (floats(&case["a"]), floats(&case["b"]));
        let w = welch_ttest(&a, &b, 0.05).unwrap();
        assert!(close(w.t_statistic, case["t"].as_f64().unwrap(), 1e-6));
        assert!(close(w.p_value, case["p"].as_f64().unwrap(), 1e-6));
        let s = student_ttest(&a, &b, 0.05).unwrap();
        assert!(close(s.t_statistic, case["student_t"].as_f64().unwrap(), 1e-6));
        assert!(close(s.p_value, case["student_p"].as_f64().unwrap(), 1e-6));
    }
}

#[test]
fn anova_matches_reference() {
    for case in oracle()["anova"].as_array().unwrap() {
        let g = groups(&case["groups"]);
        let refs: Vec<&[f64]> = g.iter().map(|x| x.as_slice()).collect();
        let r = anova_oneway(&refs).unwrap();
        assert!(close(r.f_statistic, case["f"].as_f64().unwrap(), 1e-6));
        assert!(close(r.p_value, case["p"].as_f64().unwrap(), 1e-6));
    }
}

#[test]
fn shapiro_wilk_matches_reference() {
    for case in oracle()["shapiro"].as_array().unwrap() {
        let (w, p) = shapiro_wilk(&floats(&case["x"])).unwrap();
        assert!(close(w, case["w"].as_f64().unwrap(), 1e-5), "{w} vs {}", case["w"]);
        assert!(close(p, case["p"].as_f64().unwrap(), 1e-4), "{p} vs {}", case["p"]);
    }
}

#[test]
fn brown_forsythe_matches_reference() {
    for case in oracle()["brown_forsythe"].as_array().unwrap() {
        let g = groups(&case["groups"]);
        let refs: Vec<&[f64]> = g.iter().map(|x| x.as_slice()).collect();
        let r = brown_forsythe(&refs).unwrap();
        assert!(close(r.f_statistic, case["f"].as_f64().unwrap(), 1e-6));
        assert!(close(r.p_value, case["p"].as_f64().unwrap(), 1e-6));
    }
}
