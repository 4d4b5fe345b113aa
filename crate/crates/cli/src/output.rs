use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{write_error, CliError};

/// Opens `path` for writing, or standard output for `None` or `-`.
pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| write_error(&p.display().to_string(), e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

pub fn write_line(out: &mut dyn Write, line: &str, flush: bool) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| write_error("output", e))?;
    if flush {
        out.flush().map_err(|e| write_error("output", e))?;
    }
    Ok(())
}

pub fn finish(mut out: Box<dyn Write>) -> Result<(), CliError> {
    out.flush().map_err(|e| write_error("output", e))
}
