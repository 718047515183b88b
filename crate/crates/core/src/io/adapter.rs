use std::io::Write;
use std::process::{Command, Stdio};

use super::ingest::{parse_matrix_csv, Table};
use super::IoError;

pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn csv_row(values: &[f64]) -> String {
    let mut line = values.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Query a black-box model through a shell command.
///
/// The child receives one CSV row of features per sample on stdin and must
/// print one CSV row of per-class scores per sample, in order, on stdout.
pub fn subprocess_adapter(command: &str, rows: &[Vec<f64>]) -> Result<Table, IoError> {
    let adapter_err = |message: String, stderr: &[u8]| IoError::Adapter {
        message,
        stderr: String::from_utf8_lossy(stderr).into_owned(),
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| adapter_err(format!("cannot start '{command}': {e}"), b""))?;

    let input: String = rows.iter().map(|r| csv_row(r)).collect();
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let output = child
        .wait_with_output()
        .map_err(|e| adapter_err(format!("waiting for '{command}': {e}"), b""))?;
    let write_result = writer.join().expect("adapter writer thread panicked");

    if !output.status.success() {
        return Err(adapter_err(format!("'{command}' exited with {}", output.status), &output.stderr));
    }
    if let Err(e) = write_result {
        return Err(adapter_err(format!("writing to '{command}': {e}"), &output.stderr));
    }
    let table = parse_matrix_csv(output.stdout.as_slice(), false, "adapter output")
        .map_err(|e| adapter_err(format!("malformed output: {e}"), &output.stderr))?;
    if table.rows.len() != rows.len() {
        return Err(adapter_err(
            format!("child emitted {} rows for {} inputs", table.rows.len(), rows.len()),
            &output.stderr,
        ));
    }
    Ok(table)
}
