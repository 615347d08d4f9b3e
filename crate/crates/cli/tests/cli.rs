use std::path::Path;
use std::process::Command;

fn run(bin: &str, args: &[&str]) -> String {
    let out = Command::new(bin).args(args).output().unwrap();
    assert!(out.status.success(), "{bin} {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let sales = dir.path().join("sales.csv");
    let cal = dir.path().join("calendar.csv");
    run(
        env!("CARGO_BIN_EXE_fss-data"),
        &["synth", "--products", "2", "--days", "400", "--seed", "3", "--out-sales", p(&sales), "--out-calendar", p(&cal)],
    );
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "n_changepoints = 5\nyearly_order = 4\n").unwrap();
    let out = dir.path().join("fc.csv");
    let first_id = std::fs::read_to_string(&sales).unwrap().lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    run(
        env!("CARGO_BIN_EXE_fss-data"),
        &[
            "forecast", "--sales", p(&sales), "--calendar", p(&cal), "--product", &first_id, "--spec", p(&spec), "--horizon", "7",
            "--out", p(&out),
        ],
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "date,level,weekly,yearly,events,total");
    for line in lines.clone() {
        let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert!((v[0] + v[1] + v[2] + v[3] - v[4]).abs() < 1e-9);
    }
    assert_eq!(lines.count(), 7);
}

#[test]
fn summarize_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    let header = "session_id,worker_id,treatment,product_index,product_id,av,rmae,mape,mape_excluded,model_vs_ses_rmae,view_seconds,completion_seconds,duplicate,bonus_cents,s1,s2,s3,s4,s5,comment";
    let mut rows = vec![header.to_string()];
    for (i, t) in ["O", "T", "TA", "O"].iter().enumerate() {
        for k in 0..3 {
            rows.push(format!(
                "S{i},w{i},{t},{k},P{k},{},0.9,0.1,0,0.8,20,{},false,100,5,5,5,5,5,",
                0.1 * k as f64,
                if i == 3 { 100 } else { 400 }
            ));
        }
    }
    std::fs::write(&results, rows.join("\n")).unwrap();
    let tables = dir.path().join("tables");
    let stdout = run(
        env!("CARGO_BIN_EXE_fss-metrics"),
        &["summarize", "--in", p(&results), "--resample-seed", "7", "--out", p(&tables)],
    );
    assert!(stdout.contains("AV mean"));
    let t1 = std::fs::read_to_string(tables.join("table1_participants.csv")).unwrap();
    assert_eq!(t1.lines().last().unwrap(), "Drop Completion Time below 3 min,1,1,1");
    let t2 = std::fs::read_to_string(tables.join("table2_adjustment.csv")).unwrap();
    assert_eq!(t2.lines().next().unwrap(), "FSS,AV_mean,AV_std,AF");
    assert!(t2.contains("O,0.10,0.10,0.67"));
}
