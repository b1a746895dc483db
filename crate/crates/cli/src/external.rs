//! Child-process objectives.
//!
//! Protocol: each evaluation spawns the command, writes the parameter vector
//! as one line of space-separated decimals (17 significant digits) to its
//! standard input, and reads one decimal reward line from its standard
//! output. Nonzero exit status or unparsable output aborts the run; the
//! partial log is still flushed.

use std::io::Write;
use std::process::{Command, Stdio};

use safebo_core::explore::{Objective, ObjectiveError};
use safebo_core::runlog::fmt_g;

pub struct ExternalCommand {
    program: String,
    args: Vec<String>,
}

impl ExternalCommand {
    /// Splits a command line on whitespace; the first token is the program.
    pub fn parse(command_line: &str) -> Result<Self, ObjectiveError> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| ObjectiveError("empty external command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }
}

impl Objective for ExternalCommand {
    fn evaluate(&mut self, point: &[f64]) -> Result<f64, ObjectiveError> {
        let line = point
            .iter()
            .map(|&x| fmt_g(x, 17))
            .collect::<Vec<_>>()
            .join(" ");
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ObjectiveError(format!("cannot spawn '{}': {e}", self.program)))?;
        {
            let stdin = child.stdin.as_mut().expect("piped stdin");
            stdin
                .write_all(format!("{line}\n").as_bytes())
                .map_err(|e| ObjectiveError(format!("cannot write to '{}': {e}", self.program)))?;
        }
        let output = child
            .wait_with_output()
            .map_err(|e| ObjectiveError(format!("cannot wait for '{}': {e}", self.program)))?;
        if !output.status.success() {
            return Err(ObjectiveError(format!(
                "'{}' exited with {}",
                self.program, output.status
            )));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let first = text
            .lines()
            .next()
            .ok_or_else(|| ObjectiveError(format!("'{}' produced no output", self.program)))?;
        first.trim().parse::<f64>().map_err(|e| {
            ObjectiveError(format!(
                "'{}' produced unparsable reward '{first}': {e}",
                self.program
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_stub_returns_constant() {
        let mut obj = ExternalCommand::parse("echo 0.5").unwrap();
        assert_eq!(obj.evaluate(&[0.1, 0.2]).unwrap(), 0.5);
        assert_eq!(obj.evaluate(&[0.9]).unwrap(), 0.5);
    }

    #[test]
    fn missing_program_is_an_error() {
        let mut obj = ExternalCommand::parse("definitely-not-a-real-binary-1234").unwrap();
        assert!(obj.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn unparsable_output_is_an_error() {
        let mut obj = ExternalCommand::parse("echo not-a-number").unwrap();
        assert!(obj.evaluate(&[0.0]).is_err());
    }
}
