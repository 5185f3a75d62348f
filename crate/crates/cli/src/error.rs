use std::fmt;

/// Invalid arguments, configuration or manifest contents.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Process exit code for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<tritone_core::Error>() {
            return match e {
                tritone_core::Error::Io(_) => EXIT_IO,
                tritone_core::Error::Csv(c) if c.is_io_error() => EXIT_IO,
                e if e.is_numerical() => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { EXIT_IO } else { EXIT_USAGE };
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_USAGE };
        }
    }
    EXIT_NUMERICAL
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn classification() {
        let usage = anyhow::Error::new(UsageError("bad".into())).context("while parsing");
        assert_eq!(exit_code(&usage), EXIT_USAGE);
        let io: anyhow::Result<()> = Err(std::io::Error::other("disk")).context("writing");
        assert_eq!(exit_code(&io.unwrap_err()), EXIT_IO);
        let num = anyhow::Error::new(tritone_core::Error::DegenerateJacobian);
        assert_eq!(exit_code(&num), EXIT_NUMERICAL);
        let param = anyhow::Error::new(tritone_core::Error::InvalidParameter("x".into()));
        assert_eq!(exit_code(&param), EXIT_USAGE);
    }
}
