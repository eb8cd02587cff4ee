//! End-to-end tests of the `star` binary: building and growing indexes,
//! querying them, output shapes in both formats, worker-count determinism,
//! and the exit-code contract.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn star() -> Command {
    Command::new(env!("CARGO_BIN_EXE_star"))
}

struct Run {
    stdout: String,
    stderr: String,
    code: i32,
}

fn run(cmd: &mut Command) -> Run {
    let output = cmd.output().expect("binary runs");
    Run {
        stdout: String::from_utf8(output.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(output.stderr).expect("utf-8 stderr"),
        code: output.status.code().expect("exit code"),
    }
}

/// Data rows of a TSV table: everything that is not a `#` comment line.
fn data_rows(stdout: &str) -> Vec<Vec<String>> {
    stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn themed_corpus() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (
            "sun1",
            "Solar farm",
            "Solar panels convert sunlight into electric power. The panel array feeds the \
             energy grid.\n\nInverters regulate the electric output of the solar array.",
        ),
        (
            "sun2",
            "Rooftop solar",
            "Rooftop solar panels supply electric power to homes. Excess energy flows back \
             to the grid.\n\nThe panel inverters manage the electric flow.",
        ),
        (
            "sun3",
            "Desert solar",
            "Desert solar farms track sunlight with moving panel mounts. The energy output \
             of the array is enormous.\n\nGrid operators prize steady electric supply.",
        ),
        (
            "wind1",
            "Wind park",
            "Wind turbines spin in the coastal breeze generating power. Each turbine blade \
             is longer than a bus.\n\nThe wind park feeds the energy grid at night.",
        ),
        (
            "wind2",
            "Turbine tech",
            "A turbine converts wind into rotational power. Blade design determines how \
             much energy a turbine captures.\n\nOffshore wind parks avoid grid congestion.",
        ),
        (
            "cook1",
            "Bread basics",
            "Knead the dough until the flour and water bind. Let the dough rise before \
             baking the bread.\n\nA hot oven gives bread a crisp crust.",
        ),
        (
            "cook2",
            "Pizza night",
            "Stretch the dough thin and top it before baking. The oven must be very hot \
             for pizza.\n\nFlour on the peel keeps the dough from sticking.",
        ),
        (
            "cook3",
            "Pastry",
            "Pastry dough needs cold butter folded into the flour. Bake in a moderate oven \
             until golden.\n\nResting the dough relaxes the gluten.",
        ),
    ]
}

fn write_jsonl(path: &Path, docs: &[(&str, &str, &str)]) {
    let mut out = String::new();
    for (id, title, text) in docs {
        let line = serde_json::json!({ "id": id, "title": title, "text": text });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).expect("corpus written");
}

/// Build an index over the themed corpus; returns (workdir, index, corpus).
fn build_themed_index() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &themed_corpus());
    let index = dir.path().join("idx");
    let result = run(star()
        .args(["build", "--corpus"])
        .arg(&corpus)
        .arg("--index")
        .arg(&index)
        .args(["--d", "256", "--k", "8", "--max-df-ratio", "0.6", "--min-count", "2"]));
    assert_eq!(result.code, 0, "build failed: {}", result.stderr);
    assert_eq!(result.stdout.trim(), index.display().to_string());
    (dir, index, corpus)
}

#[test]
fn build_then_query_retrieves_the_document_itself() {
    let (_dir, index, _corpus) = build_themed_index();
    // Indexed vectors fold the title into the text, so replicate that here.
    let (_, title, body) = themed_corpus()[3]; // wind1
    let result = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg(format!("{title}\n\n{body}"))
        .args(["--k", "3"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows = data_rows(&result.stdout);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[0][1], "1.0000");
    assert_eq!(rows[0][2], "wind1");
    assert_eq!(rows[0][3], "Wind park");
}

#[test]
fn rebuilds_and_worker_counts_are_bit_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &themed_corpus());
    let build = |index: &Path, workers: &str| {
        let result = run(star()
            .args(["build", "--corpus"])
            .arg(&corpus)
            .arg("--index")
            .arg(index)
            .args(["--d", "256", "--k", "8", "--max-df-ratio", "0.6", "--min-count", "2"])
            .args(["--workers", workers]));
        assert_eq!(result.code, 0, "{}", result.stderr);
    };
    let (one, three) = (dir.path().join("one"), dir.path().join("three"));
    build(&one, "1");
    build(&three, "3");
    let terms_one = std::fs::read(one.join("terms.vec")).expect("terms.vec");
    let terms_three = std::fs::read(three.join("terms.vec")).expect("terms.vec");
    assert_eq!(terms_one, terms_three, "worker count changed the stored term matrix");

    let query = |workers: &str| {
        let result = run(star()
            .arg("query")
            .arg("--index")
            .arg(&one)
            .arg("solar panel energy grid")
            .args(["--k", "8", "--workers", workers]));
        assert_eq!(result.code, 0, "{}", result.stderr);
        result.stdout
    };
    assert_eq!(query("1"), query("4"), "worker count changed query output");
}

#[test]
fn query_json_rows_have_the_documented_shape() {
    let (_dir, index, _corpus) = build_themed_index();
    let result = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg("dough flour oven")
        .args(["--k", "2", "--json"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows: serde_json::Value = serde_json::from_str(&result.stdout).expect("valid json");
    let rows = rows.as_array().expect("array of rows");
    assert_eq!(rows.len(), 2);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["rank"], i as u64 + 1);
        assert!(row["sigma"].is_f64());
        assert!(row["id"].is_string());
        assert!(row.get("title").is_some());
    }
    assert!(rows[0]["id"].as_str().expect("id").starts_with("cook"));
}

#[test]
fn query_reads_text_from_a_file() {
    let (dir, index, _corpus) = build_themed_index();
    let query_file = dir.path().join("query.txt");
    std::fs::write(&query_file, "turbine blade wind power").expect("query file");
    let result = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg("--file")
        .arg(&query_file)
        .args(["--k", "2"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows = data_rows(&result.stdout);
    assert!(rows[0][2].starts_with("wind"), "unexpected top hit {:?}", rows[0]);
}

#[test]
fn neighbors_list_the_term_itself_first() {
    let (_dir, index, _corpus) = build_themed_index();
    let result = run(star()
        .arg("neighbors")
        .arg("--index")
        .arg(&index)
        .args(["--term", "turbine", "--k", "5"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    assert!(result.stdout.starts_with("# term\tsigma\n"));
    let rows = data_rows(&result.stdout);
    assert_eq!(rows[0][0], "turbine");
    assert_eq!(rows[0][1], "1.0000");
    let sigmas: Vec<f64> = rows.iter().map(|r| r[1].parse().expect("sigma")).collect();
    for pair in sigmas.windows(2) {
        assert!(pair[0] >= pair[1], "sigma not descending: {sigmas:?}");
    }
}

#[test]
fn neighbors_reject_removing_the_term_from_itself() {
    let (_dir, index, _corpus) = build_themed_index();
    let result = run(star()
        .arg("neighbors")
        .arg("--index")
        .arg(&index)
        .args(["--term", "turbine", "--orthogonal-to", "turbine"]));
    assert_eq!(result.code, 3, "stderr: {}", result.stderr);
    assert!(result.stderr.contains("zero vector"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().expect("tempdir");

    // 4: missing index directory.
    let missing = run(star()
        .arg("stats")
        .arg("--index")
        .arg(dir.path().join("nowhere")));
    assert_eq!(missing.code, 4, "stderr: {}", missing.stderr);

    // 2: empty corpus.
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").expect("empty corpus");
    let no_docs = run(star()
        .args(["build", "--corpus"])
        .arg(&empty)
        .arg("--index")
        .arg(dir.path().join("idx")));
    assert_eq!(no_docs.code, 2, "stderr: {}", no_docs.stderr);

    // 2: malformed flags (clap).
    let bad_flags = run(star().arg("query"));
    assert_eq!(bad_flags.code, 2);

    // 3: unknown term.
    let (_dir2, index, _corpus) = build_themed_index();
    let unknown = run(star()
        .arg("neighbors")
        .arg("--index")
        .arg(&index)
        .args(["--term", "zzzmissing"]));
    assert_eq!(unknown.code, 3, "stderr: {}", unknown.stderr);

    // 3: query with no significant terms.
    let nonsense = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg("qqq zzz vvv"));
    assert_eq!(nonsense.code, 3, "stderr: {}", nonsense.stderr);

    // 4: corrupted data file.
    let terms = index.join("terms.vec");
    let mut bytes = std::fs::read(&terms).expect("terms.vec");
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&terms, &bytes).expect("corrupted terms.vec");
    let corrupted = run(star().arg("stats").arg("--index").arg(&index));
    assert_eq!(corrupted.code, 4, "stderr: {}", corrupted.stderr);
    assert!(corrupted.stderr.contains("checksum"), "stderr: {}", corrupted.stderr);
}

#[test]
fn add_extends_an_existing_index() {
    let (dir, index, _corpus) = build_themed_index();
    let extra = dir.path().join("more.jsonl");
    write_jsonl(
        &extra,
        &[(
            "wind3",
            "Gearbox",
            "The turbine gearbox converts slow blade rotation into generator speed. Wind \
             power output depends on blade length.\n\nGrid codes limit turbine output swings.",
        )],
    );
    let added = run(star()
        .arg("add")
        .arg("--index")
        .arg(&index)
        .arg("--corpus")
        .arg(&extra));
    assert_eq!(added.code, 0, "{}", added.stderr);

    let stats = run(star().arg("stats").arg("--index").arg(&index));
    assert_eq!(stats.code, 0, "{}", stats.stderr);
    let fields: HashMap<String, String> = data_rows(&stats.stdout)
        .into_iter()
        .map(|row| (row[0].clone(), row[1].clone()))
        .collect();
    assert_eq!(fields["documents"], "9");
    assert_eq!(fields["embedded_documents"], "9");

    let hit = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg("turbine gearbox generator blade")
        .args(["--k", "1"]));
    assert_eq!(hit.code, 0, "{}", hit.stderr);
    assert_eq!(data_rows(&hit.stdout)[0][2], "wind3");

    // Adding the same documents again collides.
    let again = run(star()
        .arg("add")
        .arg("--index")
        .arg(&index)
        .arg("--corpus")
        .arg(&extra));
    assert_eq!(again.code, 3, "stderr: {}", again.stderr);
    assert!(again.stderr.contains("duplicate"), "stderr: {}", again.stderr);
}

#[test]
fn cluster_groups_the_planted_themes() {
    let (_dir, index, _corpus) = build_themed_index();
    for args in [&["--threshold", "0.5"][..], &["--clusters", "3"][..]] {
        let result = run(star().arg("cluster").arg("--index").arg(&index).args(args));
        assert_eq!(result.code, 0, "{}", result.stderr);
        let mut cluster_of: HashMap<String, String> = HashMap::new();
        for row in data_rows(&result.stdout) {
            if row.len() == 3 {
                cluster_of.insert(row[2].clone(), row[0].clone());
            }
        }
        for (a, b) in [("sun1", "sun2"), ("sun2", "sun3"), ("wind1", "wind2"), ("cook1", "cook3")]
        {
            assert_eq!(cluster_of.get(a), cluster_of.get(b), "{a} and {b} split up");
        }
        assert_ne!(cluster_of["sun1"], cluster_of["wind1"]);
        assert_ne!(cluster_of["sun1"], cluster_of["cook1"]);
        assert!(result.stdout.contains("# singletons\t0\n"));
    }
}

#[test]
fn summarize_marks_skipped_units_with_ellipses() {
    let (dir, index, _corpus) = build_themed_index();
    let note = dir.path().join("note.txt");
    std::fs::write(
        &note,
        "Wind turbines capture breeze power.\n\nDough and flour make bread in a hot \
         oven.\n\nTurbine blades generate energy for the grid.\n\nSolar panels feed \
         electric power to the grid.\n",
    )
    .expect("note written");
    let result = run(star()
        .arg("summarize")
        .arg("--index")
        .arg(&index)
        .arg("--file")
        .arg(&note)
        .args(["--n-keep", "2"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let lines: Vec<&str> = result.stdout.lines().collect();
    assert_eq!(lines[0], "# unit\tsigma\ttext");
    let kept: Vec<Vec<String>> = data_rows(&result.stdout)
        .into_iter()
        .filter(|row| row.len() == 3)
        .collect();
    assert_eq!(kept.len(), 2, "stdout: {}", result.stdout);
    let indices: Vec<usize> = kept.iter().map(|r| r[0].parse().expect("unit index")).collect();
    assert!(indices[0] < indices[1], "kept units out of order");
    assert!(
        result.stdout.lines().any(|l| l == "..."),
        "no gap marker in: {}",
        result.stdout
    );
}

#[test]
fn summarize_finds_an_indexed_document_by_id() {
    let (_dir, index, corpus) = build_themed_index();
    let result = run(star()
        .arg("summarize")
        .arg("--index")
        .arg(&index)
        .args(["--doc", "sun1", "--corpus"])
        .arg(&corpus)
        .args(["--n-keep", "1", "--unit", "sentence", "--json"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let obj: serde_json::Value = serde_json::from_str(&result.stdout).expect("valid json");
    assert_eq!(obj["doc_id"], "sun1");
    assert_eq!(obj["unit"], "sentence");
    assert_eq!(obj["kept"].as_array().expect("kept array").len(), 1);
    let missing = run(star()
        .arg("summarize")
        .arg("--index")
        .arg(&index)
        .args(["--doc", "ghost", "--corpus"])
        .arg(&corpus));
    assert_eq!(missing.code, 3, "stderr: {}", missing.stderr);
}

#[test]
fn compare_at_a_high_threshold_matches_documents_with_themselves_only() {
    let (_dir, index, corpus) = build_themed_index();
    let result = run(star()
        .arg("compare")
        .arg("--index")
        .arg(&index)
        .args(["all", "all", "--threshold", "0.99"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows = data_rows(&result.stdout);
    assert_eq!(rows.len(), themed_corpus().len());
    for row in &rows {
        assert_eq!(row[0], row[1], "non-self match above 0.99: {row:?}");
        assert_eq!(row[2], "1.0000");
    }

    let baseline = run(star()
        .arg("compare")
        .arg("--index")
        .arg(&index)
        .args(["all", "all", "--threshold", "0.3", "--baseline", "--corpus"])
        .arg(&corpus));
    assert_eq!(baseline.code, 0, "{}", baseline.stderr);
    assert!(baseline.stdout.starts_with("# a\tb\tsigma\tsigma_bow\n"));
    for row in data_rows(&baseline.stdout) {
        assert_eq!(row.len(), 4, "row without baseline column: {row:?}");
        let sigma: f64 = row[2].parse().expect("sigma");
        let bow: f64 = row[3].parse().expect("sigma_bow");
        assert!((-1.0..=1.0).contains(&bow));
        assert!(sigma >= 0.3);
    }
}

#[test]
fn usage_prints_both_columns() {
    let (_dir, index, corpus) = build_themed_index();
    let result = run(star()
        .arg("usage")
        .arg("--index")
        .arg(&index)
        .arg("--corpus")
        .arg(&corpus)
        .args(["--doc-a", "sun1", "--doc-b", "wind1", "--top", "5"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows = data_rows(&result.stdout);
    assert!(rows.iter().any(|r| r[0] == "a" && r[1] == "sun1"));
    assert!(rows.iter().any(|r| r[0] == "b" && r[1] == "wind1"));
    for row in &rows {
        assert_eq!(row.len(), 6);
        assert!(row[5] == "true" || row[5] == "false");
    }
}

#[test]
fn noise_report_shows_square_root_scaling() {
    let result = run(star().args([
        "noise",
        "--d",
        "128",
        "--d",
        "512",
        "--samples",
        "3000",
    ]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let rows = data_rows(&result.stdout);
    assert_eq!(rows.len(), 2);
    let std_narrow: f64 = rows[0][4].parse().expect("std");
    let std_wide: f64 = rows[1][4].parse().expect("std");
    let ratio = std_narrow / std_wide;
    assert!((1.6..=2.4).contains(&ratio), "std ratio {ratio:.3} strays from 2.0");

    // Same flags, same bytes.
    let again = run(star().args([
        "noise",
        "--d",
        "128",
        "--d",
        "512",
        "--samples",
        "3000",
    ]));
    assert_eq!(result.stdout, again.stdout);
}

#[test]
fn stats_honors_the_index_env_variable() {
    let (_dir, index, _corpus) = build_themed_index();
    let result = run(star().arg("stats").env("STAR_INDEX", &index));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let fields: HashMap<String, String> = data_rows(&result.stdout)
        .into_iter()
        .map(|row| (row[0].clone(), row[1].clone()))
        .collect();
    assert_eq!(fields["documents"], "8");
    assert_eq!(fields["d"], "256");
    assert_eq!(fields["context_mode"], "sentence");
}

#[test]
fn tsv_output_escapes_hostile_titles() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus.jsonl");
    let mut docs = themed_corpus();
    docs.push((
        "hostile",
        "tabbed\ttitle\nwith newline",
        "Solar panels and wind turbines both feed electric energy into the power grid. \
         The grid balances solar and wind output.",
    ));
    write_jsonl(&corpus, &docs);
    let index = dir.path().join("idx");
    let built = run(star()
        .args(["build", "--corpus"])
        .arg(&corpus)
        .arg("--index")
        .arg(&index)
        .args(["--d", "256", "--k", "8", "--max-df-ratio", "0.6", "--min-count", "2"]));
    assert_eq!(built.code, 0, "{}", built.stderr);
    let result = run(star()
        .arg("query")
        .arg("--index")
        .arg(&index)
        .arg("solar wind grid energy electric")
        .args(["--k", "9"]));
    assert_eq!(result.code, 0, "{}", result.stderr);
    let hostile_row = result
        .stdout
        .lines()
        .find(|l| l.split('\t').nth(2) == Some("hostile"))
        .expect("hostile document retrieved");
    assert_eq!(hostile_row.split('\t').count(), 4, "field count broken by title");
    assert!(hostile_row.contains("tabbed\\ttitle\\nwith newline"));
}

#[test]
fn window_context_mode_builds_and_differs_from_sentence_mode() {
    let dir = tempfile::tempdir().expect("tempdir");
    let corpus = dir.path().join("corpus.jsonl");
    write_jsonl(&corpus, &themed_corpus());
    let build = |index: &Path, context: &str| {
        let result = run(star()
            .args(["build", "--corpus"])
            .arg(&corpus)
            .arg("--index")
            .arg(index)
            .args(["--d", "256", "--k", "8", "--max-df-ratio", "0.6", "--min-count", "2"])
            .args(["--context", context]));
        assert_eq!(result.code, 0, "{}: {}", context, result.stderr);
    };
    let (by_sentence, by_window) = (dir.path().join("s"), dir.path().join("w"));
    build(&by_sentence, "sentence");
    build(&by_window, "window:3");
    let terms_s = std::fs::read(by_sentence.join("terms.vec")).expect("terms.vec");
    let terms_w = std::fs::read(by_window.join("terms.vec")).expect("terms.vec");
    assert_ne!(terms_s, terms_w, "window mode did not change the accumulation");

    let invalid = run(star()
        .args(["build", "--corpus"])
        .arg(&corpus)
        .arg("--index")
        .arg(dir.path().join("bad"))
        .args(["--context", "windows:5"]));
    assert_eq!(invalid.code, 2, "stderr: {}", invalid.stderr);
}
