//! Authorized, seekable delivery of stored audio.
//!
//! Callers that may not see a stored name get the same not-found error
//! whether or not the name exists, so guessing names reveals nothing.

use crate::app::App;
use crate::auth::Principal;
use crate::error::{Error, ErrorCode, Result};

/// One `Range: bytes=...` spec, before it is resolved against a length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteRange {
    /// `first-last`, both inclusive.
    Bounded(u64, u64),
    /// `first-`
    From(u64),
    /// `-suffix_len`
    Suffix(u64),
}

/// Parses a single-range `Range` header value.
///
/// Returns `None` for anything this server does not honour (syntax errors,
/// other units, multiple ranges); such headers are ignored and the full
/// body is served.
pub fn parse_range(header: &str) -> Option<ByteRange> {
    let spec = header.trim().strip_prefix("bytes=")?.trim();
    if spec.contains(',') {
        return None;
    }
    let (first, last) = spec.split_once('-')?;
    let (first, last) = (first.trim(), last.trim());
    let num = |s: &str| -> Option<u64> {
        (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse().ok())?
    };
    match (first.is_empty(), last.is_empty()) {
        (true, false) => num(last).map(ByteRange::Suffix),
        (false, true) => num(first).map(ByteRange::From),
        (false, false) => {
            let (a, b) = (num(first)?, num(last)?);
            (a <= b).then_some(ByteRange::Bounded(a, b))
        }
        (true, true) => None,
    }
}

impl ByteRange {
    /// Inclusive `(start, end)` within a body of `total` bytes, or `None`
    /// when unsatisfiable.
    pub fn resolve(self, total: u64) -> Option<(u64, u64)> {
        if total == 0 {
            return None;
        }
        match self {
            ByteRange::Bounded(a, b) if a < total => Some((a, b.min(total - 1))),
            ByteRange::From(a) if a < total => Some((a, total - 1)),
            ByteRange::Suffix(n) if n > 0 => Some((total.saturating_sub(n), total - 1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioResponse {
    pub content_type: &'static str,
    pub total_len: u64,
    /// Inclusive byte span for a 206 answer; `None` means the full body (200).
    pub range: Option<(u64, u64)>,
    pub bytes: Vec<u8>,
}

impl AudioResponse {
    pub fn status(&self) -> u16 {
        if self.range.is_some() {
            206
        } else {
            200
        }
    }

    pub fn content_range(&self) -> Option<String> {
        self.range.map(|(a, b)| format!("bytes {a}-{b}/{}", self.total_len))
    }
}

fn not_found() -> Error {
    Error::new(ErrorCode::NotFound, "audio not found")
}

impl App {
    /// Serves stored audio to admins and to users assigned to its datapoint.
    ///
    /// An unsatisfiable range fails with `ERR_RANGE` whose message is the
    /// `Content-Range` value (`bytes */<len>`) to send along with the 416.
    pub fn serve_audio(&self, principal: &Principal, stored_name: &str, range: Option<&str>) -> Result<AudioResponse> {
        let format = {
            let t = self.store.read();
            let dp = t.datapoint_by_stored_name(stored_name).ok_or_else(not_found)?;
            if !principal.is_admin() && t.assignment_for(dp.id, principal.user_id).is_none() {
                return Err(not_found());
            }
            dp.format
        };
        let total_len = match self.blobs.size(stored_name)? {
            Some(n) => n,
            None => {
                tracing::error!(blob = %stored_name, "datapoint exists but its audio is missing");
                return Err(not_found());
            }
        };
        let span = match range.and_then(parse_range) {
            Some(r) => Some(
                r.resolve(total_len)
                    .ok_or_else(|| Error::new(ErrorCode::Range, format!("bytes */{total_len}")))?,
            ),
            None => None,
        };
        let (offset, len) = match span {
            Some((a, b)) => (a, b - a + 1),
            None => (0, total_len),
        };
        let bytes = self.blobs.read_range(stored_name, offset, len)?;
        Ok(AudioResponse {
            content_type: format.content_type(),
            total_len,
            range: span,
            bytes,
        })
    }
}
