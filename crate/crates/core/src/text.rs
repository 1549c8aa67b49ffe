//! Unicode handling for every piece of stored text.

use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

use crate::error::{Error, ErrorCode, Result};

/// Returns the NFC form of `s`.
pub fn normalize_text(s: &str) -> String {
    match is_nfc_quick(s.chars()) {
        IsNormalized::Yes => s.to_owned(),
        _ => s.nfc().collect(),
    }
}

/// Decodes `bytes` as UTF-8 and normalizes the result to NFC.
pub fn normalize_bytes(bytes: &[u8]) -> Result<String> {
    let s = std::str::from_utf8(bytes).map_err(|e| {
        Error::new(
            ErrorCode::InvalidEncoding,
            format!("invalid UTF-8 at byte {}", e.valid_up_to()),
        )
    })?;
    Ok(normalize_text(s))
}

/// Normalizes a name-like field and rejects it if nothing but whitespace is left.
pub(crate) fn normalize_name(field: &str, s: &str) -> Result<String> {
    let s = normalize_text(s.trim());
    if s.is_empty() {
        return Err(Error::bad_request(format!("{field} must not be empty")));
    }
    Ok(s)
}
