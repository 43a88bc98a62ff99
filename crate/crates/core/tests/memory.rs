//! Peak heap usage while reading large frame files.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::sync::atomic::{AtomicUsize, Ordering};

use syltok::format::{FrameReader, FrameWriter, FramesHeader};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

/// Peak bytes allocated above the level at entry while `f` runs.
fn peak_during<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let out = f();
    (out, PEAK.load(Ordering::SeqCst) - base)
}

const DIM: usize = 256;
const N_FRAMES: usize = 32 * 1024;

fn value(i: usize, j: usize) -> f64 {
    ((i * 31 + j * 7) % 1000) as f64 / 8.0
}

// one test so no other test thread allocates during measurement
#[test]
fn large_files_are_read_without_a_second_copy() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.syl2");
    let header = FramesHeader { frame_rate_hz: 50.0, dim: DIM as u32, n_frames: N_FRAMES as u64 };
    let payload = header.payload_bytes() as usize;
    assert_eq!(payload, 32 << 20);

    let mut w = FrameWriter::new(BufWriter::new(File::create(&path).unwrap()), header).unwrap();
    let mut row = vec![0.0; DIM];
    for i in 0..N_FRAMES {
        row.iter_mut().enumerate().for_each(|(j, x)| *x = value(i, j));
        w.write_row(&row).unwrap();
    }
    w.finish().unwrap();

    // row streaming holds O(dim) state
    let (checksum, peak) = peak_during(|| {
        let mut r = FrameReader::new(BufReader::new(File::open(&path).unwrap())).unwrap();
        let mut row = vec![0.0; DIM];
        let mut sum = 0.0;
        while r.read_row(&mut row).unwrap() {
            sum += row[0];
        }
        sum
    });
    let expected: f64 = (0..N_FRAMES).map(|i| value(i, 0)).sum();
    assert_eq!(checksum, expected);
    assert!(peak < payload / 100, "streaming peak {peak} bytes");

    // a full read allocates the decoded matrix once, plus bounded scratch
    let (frames, peak) = peak_during(|| FrameReader::open(&path).unwrap().read_all("big").unwrap());
    let decoded = std::mem::size_of_val(frames.as_slice());
    assert_eq!(decoded, 2 * payload);
    assert!((peak as f64) < 1.5 * decoded as f64, "read_all peak {peak} bytes for {decoded}");
    assert!(peak < decoded + payload / 8, "read_all peak {peak} bytes for {decoded}");
    assert_eq!(frames.row(N_FRAMES - 1)[DIM - 1], value(N_FRAMES - 1, DIM - 1));
}
