/// Coarse classification of failures, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or arguments that violate a precondition.
    Validation,
    /// Input files are missing, malformed or inconsistent.
    Data,
    /// A computation produced non-finite or degenerate values.
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}
