//! Exit codes, one per failure class.

use chainkey_core::dataset::DatasetError;
use chainkey_core::eval::EvalError;
use chainkey_core::llm::{CassetteError, LlmError};
use chainkey_core::memory::BudgetError;
use chainkey_core::pipeline::PipelineError;
use chainkey_core::schema::SchemaError;

pub const OTHER: u8 = 1;
pub const CONFIG: u8 = 2;
pub const IO: u8 = 3;
pub const BACKEND: u8 = 4;
pub const CASSETTE_MISS: u8 = 5;
pub const PARSE: u8 = 6;
pub const BUDGET: u8 = 7;
pub const DATASET: u8 = 8;

/// Bad flags or settings, found before any work starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// The outermost error in the chain that names a class decides the code.
/// Wrappers that only add a turn number defer to their source.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(code) = classify(cause) {
            return code;
        }
    }
    OTHER
}

fn classify(cause: &(dyn std::error::Error + 'static)) -> Option<u8> {
    if cause.is::<ConfigError>() || cause.is::<SchemaError>() || cause.is::<clap::Error>() {
        return Some(CONFIG);
    }
    if cause.is::<std::io::Error>() {
        return Some(IO);
    }
    if let Some(e) = cause.downcast_ref::<PipelineError>() {
        return match e {
            PipelineError::NoDocuments | PipelineError::Config(_) => Some(CONFIG),
            PipelineError::Parse { .. } => Some(PARSE),
            PipelineError::Llm { .. } | PipelineError::Budget { .. } | PipelineError::Merge { .. } => None,
        };
    }
    if let Some(e) = cause.downcast_ref::<BudgetError>() {
        return match e {
            BudgetError::Unreachable { .. } => Some(BUDGET),
            BudgetError::Llm(_) => None,
        };
    }
    if let Some(e) = cause.downcast_ref::<LlmError>() {
        return match e {
            LlmError::CassetteMiss { .. } => Some(CASSETTE_MISS),
            LlmError::InvalidTemperature(_) => Some(CONFIG),
            LlmError::BadReply(_) => Some(PARSE),
            LlmError::Transport(_) | LlmError::Status { .. } => Some(BACKEND),
            LlmError::Cassette(_) => None,
        };
    }
    if let Some(e) = cause.downcast_ref::<CassetteError>() {
        return match e {
            CassetteError::Io { .. } => Some(IO),
            CassetteError::Parse { .. } | CassetteError::DuplicateKey(_) => Some(CONFIG),
        };
    }
    if let Some(e) = cause.downcast_ref::<DatasetError>() {
        return match e {
            DatasetError::Io { .. } => Some(IO),
            _ => Some(DATASET),
        };
    }
    if let Some(e) = cause.downcast_ref::<EvalError>() {
        return match e {
            EvalError::Llm(_) => None,
            EvalError::Verdict { .. } => Some(PARSE),
            EvalError::NoGold { .. } => Some(DATASET),
            EvalError::EmptySeries | EvalError::EmptyText => Some(OTHER),
        };
    }
    if cause.is::<serde_json::Error>() {
        return Some(PARSE);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use chainkey_core::llm::TemplateId;

    #[test]
    fn wrapped_cassette_miss_keeps_its_code() {
        let miss = LlmError::CassetteMiss {
            template: TemplateId::Cok,
            turn: 2,
            digest: "ab".into(),
            attempt: 0,
        };
        let err = anyhow::Error::new(PipelineError::Llm {
            turn: 2,
            template: TemplateId::Cok,
            source: miss,
        })
        .context("summarizing HOTEL0");
        assert_eq!(code_for(&err), CASSETTE_MISS);
    }

    #[test]
    fn classes_are_distinct() {
        assert_eq!(code_for(&ConfigError("x".into()).into()), CONFIG);
        assert_eq!(code_for(&std::io::Error::other("x").into()), IO);
        assert_eq!(code_for(&LlmError::Transport("x".into()).into()), BACKEND);
        assert_eq!(code_for(&anyhow::anyhow!("x")), OTHER);
        let budget = PipelineError::Budget {
            turn: 0,
            source: BudgetError::Unreachable { budget: 1, reachable: 5 },
        };
        assert_eq!(code_for(&budget.into()), BUDGET);
    }
}
