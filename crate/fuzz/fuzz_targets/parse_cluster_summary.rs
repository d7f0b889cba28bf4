#![no_main]

use camlink::clustering::ClusterSummary;
use camlink::metrics::Partition;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(summary) = ClusterSummary::from_json_slice(data) {
        let _ = summary.kept_members();
        let p = Partition::from_summary(&summary);
        let n: usize = p.groups.iter().map(Vec::len).sum::<usize>() + p.rejected.len();
        assert_eq!(n, summary.image_count);
    }
});
