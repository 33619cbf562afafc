use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

use omgs_cli::audit::{cmd_audit, AuditRequest, CASES_FILE};
use omgs_cli::score::{cmd_score, ScoreRequest, SCORED_FILE};
use omgs_cli::stats::{cmd_stats, StatsRequest};
use omgs_core::audit::CapClass;
use omgs_stats::{ContingencyMethod, IqrStyle, WilcoxonMode};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn audit_caps_flow_into_scores() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts = write(
        dir.path(),
        "verdicts.csv",
        "case_id,arm,claim_id,citation_id,reviewer_id,verdict\n\
         A,omgs,c1,EB-1,r1,supported\nA,omgs,c1,EB-1,r2,supported\nA,omgs,c1,EB-1,r3,supported\n\
         B,omgs,c1,EB-2,r1,partially_supported\nB,omgs,c1,EB-2,r2,partially_supported\nB,omgs,c1,EB-2,r3,supported\n\
         C,omgs,c1,EB-3,r1,unsupported\nC,omgs,c1,EB-3,r2,unsupported\nC,omgs,c1,EB-3,r3,unsupported\n",
    );
    let initial = write(dir.path(), "initial.csv", "case_id,arm,initial_e\nA,omgs,5\nB,omgs,5\nC,omgs,4\n");
    let out = dir.path().join("audit");
    let report = cmd_audit(&AuditRequest {
        verdicts,
        initial_e: initial,
        out: out.clone(),
    })
    .unwrap();
    assert_eq!(report.percent[&CapClass::NoCap], "33.33%");
    let cases = fs::read_to_string(out.join(CASES_FILE)).unwrap();
    assert!(cases.contains("B,omgs,5,3,CapAt3,1"), "{cases}");
    assert!(cases.contains("C,omgs,4,2,CapAtLe2,1"), "{cases}");

    let scores = write(
        dir.path(),
        "scores.csv",
        "case_id,arm,scene,S,P,E,A,R,rater_id\nA,omgs,1,5,5,5,5,5,x\nB,omgs,1,4,4,5,4,4,x\nC,omgs,2,2,5,4,5,5,x\n",
    );
    let scored = cmd_score(&ScoreRequest {
        scores,
        audit: Some(out.join(CASES_FILE)),
        out: dir.path().join("score"),
    })
    .unwrap();
    let gated: Vec<&str> = scored.rows.iter().map(|r| r.overall_gated.as_str()).collect();
    assert_eq!(gated, ["5.0", "3.8", "2.0"]);
    assert_eq!(scored.rows[1].e, 3);
    assert!(scored.rows[2].gate_applied);
    assert!(dir.path().join("score").join(SCORED_FILE).is_file());
}

#[test]
fn audit_rejects_unknown_verdicts_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let verdicts = write(dir.path(), "v.csv", "case_id,claim_id,citation_id,reviewer_id,verdict\nA,c1,EB-1,r1,maybe\n");
    let initial = write(dir.path(), "i.csv", "case_id,initial_e\nA,4\n");
    let err = cmd_audit(&AuditRequest {
        verdicts,
        initial_e: initial,
        out: dir.path().join("o"),
    })
    .unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("line 2") && msg.contains("verdict"), "{msg}");
}

#[test]
fn score_rejects_out_of_range_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(dir.path(), "s.csv", "case_id,arm,scene,S,P,E,A,R\nA,omgs,1,6,5,5,5,5\n");
    let err = cmd_score(&ScoreRequest {
        scores,
        audit: None,
        out: dir.path().join("o"),
    })
    .unwrap_err();
    assert!(format!("{err:#}").contains("\"S\""));
}

#[test]
fn stats_commands() {
    let dir = tempfile::tempdir().unwrap();
    let paired = write(
        dir.path(),
        "paired.csv",
        "key,group,a,b\nk1,g1,4.2,3.1\nk2,g1,3.9,3.0\nk3,g1,4.8,3.5\nk4,g1,4.1,4.0\nk5,g1,3.7,2.9\nk6,g1,4.4,3.2\n\
         k1,g2,3.0,3.1\nk2,g2,3.2,3.0\nk3,g2,2.9,3.0\nk4,g2,3.1,3.2\nk5,g2,3.0,2.8\nk6,g2,3.3,3.3\n",
    );
    let w = cmd_stats(&StatsRequest::Wilcoxon {
        input: paired.clone(),
        mode: WilcoxonMode::Auto,
        bonferroni: None,
    })
    .unwrap();
    let g1 = &w["rows"][0];
    assert_eq!(g1["group"], "g1");
    assert_eq!(g1["result"]["method"], "exact");
    assert!((g1["result"]["p_value"].as_f64().unwrap() - 0.03125).abs() < 1e-12);
    assert!((g1["p_bonferroni"].as_f64().unwrap() - 0.0625).abs() < 1e-12);

    let t = cmd_stats(&StatsRequest::Tost {
        input: paired,
        margin: 0.5,
        alpha: 0.025,
    })
    .unwrap();
    assert_eq!(t["rows"][1]["result"]["equivalent"], true);

    let bh = write(dir.path(), "p.csv", "id,p\na,0.01\nb,0.04\nc,0.03\nd,0.2\n");
    let r = cmd_stats(&StatsRequest::Bh { input: bh, q: 0.05 }).unwrap();
    assert_eq!(r["rejected"], 1);
    assert_eq!(r["rows"][0]["rejected"], true);

    let icc = write(dir.path(), "icc.csv", "subject,rater,value\ns1,r1,1\ns1,r2,2\ns2,r1,3\ns2,r2,4\ns3,r1,5\ns3,r2,6\n");
    let r = cmd_stats(&StatsRequest::Icc { input: icc }).unwrap();
    assert!((r["result"]["icc"].as_f64().unwrap() - 16.0 / 17.0).abs() < 1e-12);

    let ages = write(dir.path(), "ages.csv", "age\n41\n44\n47\n52\n55\n58\n62\n66\n70\n");
    let r = cmd_stats(&StatsRequest::Describe {
        input: ages,
        column: "age".into(),
        style: IqrStyle::Bracket,
        decimals: 1,
    })
    .unwrap();
    assert_eq!(r["rendered"], "55.0 [47.0;62.0]");

    let table = write(dir.path(), "t.csv", "arm,yes,no\nomgs,8,2\nchair,1,5\n");
    let r = cmd_stats(&StatsRequest::Contingency {
        input: table,
        method: ContingencyMethod::FisherExact,
    })
    .unwrap();
    assert_eq!(r["result"]["method"], "exact");

    let sp = write(dir.path(), "sp.csv", "x,y\n1,2\n2,4\n3,5\n4,4.5\n");
    let r = cmd_stats(&StatsRequest::Spearman {
        input: sp,
        x: "x".into(),
        y: "y".into(),
    })
    .unwrap();
    assert!((r["rho"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn stats_binary_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(dir.path(), "t.csv", "arm,a,b,c\nx,3,1,0\ny,0,2,3\n");
    let out = dir.path().join("r.json");
    let st = Command::new(env!("CARGO_BIN_EXE_omgs"))
        .args(["stats", "contingency"])
        .arg(&table)
        .args(["--method", "monte-carlo", "--replicates", "2000", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["result"]["method"], "monte-carlo");
    assert_eq!(v["result"]["replicates"], 2000);
}
