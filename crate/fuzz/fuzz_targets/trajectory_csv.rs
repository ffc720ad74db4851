#![no_main]

use faquad::NormalizedTrajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = NormalizedTrajectory::read_csv(data) {
        let s = traj.s_grid();
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), 1.0);
        for k in 0..=16 {
            let v = traj.eval(k as f64 / 16.0);
            assert!(v.is_finite());
        }
    }
});
