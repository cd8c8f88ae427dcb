use std::process::Command;

fn memsic(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_memsic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = memsic(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn slicer_table_matches_reference_rows() {
    let text = stdout(&["slicer-table", "--order", "16", "--structure", "indirect"]);
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
            cols.iter().map(|c| c.to_string()).collect()
        })
        .collect();
    let expected = [
        ["< z1", "[0,0,0]", "[0,0]", "x1"],
        ["z1 ~ z2", "[1,0,0]", "[0,1]", "x2"],
        ["z2 ~ z3", "[1,1,0]", "[1,1]", "x3"],
        ["> z3", "[1,1,1]", "[1,0]", "x4"],
    ];
    assert_eq!(rows.len(), 4, "{text}");
    for (row, exp) in rows.iter().zip(expected) {
        assert_eq!(row[0], exp[0]);
        assert_eq!(row[1], exp[1]);
        assert_eq!(row[2], exp[2]);
        assert!(row.last().unwrap().starts_with(exp[3]), "{row:?}");
    }
}

#[test]
fn slicer_table_csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    stdout(&[
        "slicer-table",
        "--order",
        "64",
        "--structure",
        "direct",
        "--csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("interval,p,q,channel,level,v_sout"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn timing_and_energy_reports() {
    let t = stdout(&["timing"]);
    assert!(t.contains("4874.400 ns"), "{t}");
    let e = stdout(&["energy"]);
    assert!(e.contains("TOPS/W") && e.contains("8-core DSP"), "{e}");
    let csv = stdout(&["energy", "--csv"]);
    assert!(csv.lines().count() >= 2);
}

#[test]
fn demo_recovers_symbols() {
    let out = stdout(&["demo", "--seed", "2"]);
    assert!(out.contains("recovered: yes"), "{out}");
    assert_eq!(out, stdout(&["demo", "--seed", "2"]));
}

#[test]
fn ber_sweep_from_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "users = 2\nantennas = 4\nmodulation = 4\nsnr_db = [0.0, 5.0]\nprecisions = [\"4\", \"digital\"]\ntrials = 100\n",
    )
    .unwrap();
    let svg = dir.path().join("ber.svg");
    let args = [
        "ber-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "1",
        "--svg",
        svg.to_str().unwrap(),
    ];
    let a = stdout(&args);
    assert!(a.starts_with("snr_db,precision,trials,bits_sent,bit_errors,ber"));
    assert_eq!(a.lines().count(), 5);
    assert_eq!(a, stdout(&args));
    assert!(std::fs::read_to_string(svg).unwrap().contains("<svg"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let out = memsic(&["slicer-table", "--order", "8"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = memsic(&["ber-sweep", "--config", "/nonexistent.toml"]);
    assert!(!out.status.success());
    let out = memsic(&["dump-program", "--stage", "9"]);
    assert!(!out.status.success());
}

#[test]
fn dump_program_lists_arrays() {
    let out = stdout(&["dump-program", "--users", "2", "--antennas", "4", "--stage", "2", "--bits", "6"]);
    for key in ["lambda0", "[C1]", "[C6]"] {
        assert!(out.contains(key), "{out}");
    }
}
