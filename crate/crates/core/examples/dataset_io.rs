//! Generates a synthetic dataset, round-trips it through JSON lines and splits it.

use qgnn_noise::graph_data::{generate_synthetic, parse_dataset, split_dataset, write_dataset, DEFAULT_RATIOS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graphs = generate_synthetic(50, 2, 11);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("graphs.jsonl");
    write_dataset(&path, &graphs)?;
    let back = parse_dataset(&path)?;
    assert_eq!(back, graphs);
    println!("first record: {}", std::fs::read_to_string(&path)?.lines().next().unwrap_or(""));

    let split = split_dataset(&back, DEFAULT_RATIOS, 42)?;
    println!("train {} / validation {} / test {}", split.train.len(), split.validation.len(), split.test.len());

    // malformed input is rejected with its line number
    let err = qgnn_noise::graph_data::parse_record(r#"{"atoms":["C"],"bonds":[[0,0,"single"]],"target":1}"#, 7)
        .unwrap_err();
    println!("rejected: {err}");
    Ok(())
}
