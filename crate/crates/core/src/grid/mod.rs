//! Grid data model, case-file ingestion and derived networks.

mod case_json;
mod matpower;
mod model;

pub use case_json::{parse_case, serialize_case, serialize_case_compact};
pub use matpower::{parse_matpower, serialize_matpower, UNLIMITED_RATING_MVA};
pub use model::{
    Bus, BusKind, Generator, Line, Load, Network, NetworkParts, Shunt, Transformer,
    DEFAULT_V_MAX, DEFAULT_V_MIN,
};

#[cfg(test)]
pub(crate) use model::fixtures;

/// Reads a case file, choosing the reader by extension: `.m` is MATPOWER
/// text, anything else canonical JSON.
pub fn read_case_file(path: impl AsRef<std::path::Path>) -> crate::Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "m") {
        parse_matpower(&text)
    } else {
        parse_case(&text)
    }
}
