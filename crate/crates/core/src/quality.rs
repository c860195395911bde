use bitflags::bitflags;

bitflags! {
    /// Per-row quality mask carried from raw snapshots through to feature rows.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Quality: u16 {
        /// At least one of the five book levels on either side is unquoted.
        const ABSENT_LEVEL = 1 << 0;
        /// |oi_chg| > volume_chg; open/close contracts were clamped.
        const INCONSISTENT_FRAME = 1 << 1;
        /// Cumulative volume went backwards inside a session.
        const VOLUME_REGRESSION = 1 << 2;
        /// VWAP window traded zero volume; plain mean used instead.
        const ZERO_VOLUME = 1 << 3;
        /// A ratio hit a zero denominator or a band collapsed.
        const DEGENERATE = 1 << 4;
        /// Final bar of a session holds fewer than the full snapshot count.
        const SHORT_BAR = 1 << 5;
    }
}

impl Quality {
    /// Flags that disqualify a row from the training matrix.
    pub const INTEGRITY: Quality = Quality::INCONSISTENT_FRAME.union(Quality::VOLUME_REGRESSION);

    pub fn is_rejectable(self) -> bool {
        self.intersects(Self::INTEGRITY)
    }
}
