//! Named failure points for exercising rollback paths.
//!
//! A production [`crate::App`] carries an injector with nothing armed, so
//! every [`FaultInjector::check`] is a set lookup that returns `Ok`.

use std::collections::HashSet;

use parking_lot::Mutex;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultPoint {
    /// Before audio bytes reach the blob store.
    BlobWrite,
    /// After the blob is written, before the database transaction starts.
    AfterBlobWrite,
    /// Inside the ingest transaction, right after the datapoint row.
    DatapointInsert,
    /// Inside the ingest transaction, after the assignment rows.
    AssignmentInsert,
    /// Inside the ingest transaction, after pre-annotation segments.
    SegmentInsert,
    /// While the store persists a committed transaction.
    Commit,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 6] = [
        FaultPoint::BlobWrite,
        FaultPoint::AfterBlobWrite,
        FaultPoint::DatapointInsert,
        FaultPoint::AssignmentInsert,
        FaultPoint::SegmentInsert,
        FaultPoint::Commit,
    ];
}

#[derive(Debug, Default)]
pub struct FaultInjector {
    armed: Mutex<HashSet<FaultPoint>>,
}

impl FaultInjector {
    pub fn arm(&self, point: FaultPoint) {
        self.armed.lock().insert(point);
    }

    pub fn disarm(&self, point: FaultPoint) {
        self.armed.lock().remove(&point);
    }

    pub fn clear(&self) {
        self.armed.lock().clear();
    }

    pub fn check(&self, point: FaultPoint) -> Result<()> {
        if self.armed.lock().contains(&point) {
            return Err(Error::internal(format!("injected fault at {point:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn armed_points_fail_until_disarmed() {
        let faults = FaultInjector::default();
        assert!(faults.check(FaultPoint::Commit).is_ok());
        faults.arm(FaultPoint::Commit);
        assert!(faults.check(FaultPoint::Commit).is_err());
        assert!(faults.check(FaultPoint::BlobWrite).is_ok());
        faults.disarm(FaultPoint::Commit);
        assert!(faults.check(FaultPoint::Commit).is_ok());
    }
}
