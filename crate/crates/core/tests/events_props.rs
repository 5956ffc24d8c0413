use alert_core::events::{
    read_stream, sample_ccim, sample_ctim, write_stream, CcimSampler, CtimSampler, Event, StreamFormat, StreamHeader,
};
use proptest::prelude::*;

fn sorted_events(max: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0u64..5_000, 0u16..64, 0u16..48, any::<bool>()), 0..max).prop_map(|raw| {
        let mut t = 0;
        raw.into_iter()
            .map(|(dt, x, y, on)| {
                t += dt;
                Event::new(t, x, y, if on { 1 } else { -1 })
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn binary_and_csv_round_trip(events in sorted_events(300)) {
        let dir = tempfile::tempdir().unwrap();
        let header = StreamHeader::for_events(64, 48, &events);
        for (name, fmt) in [("s.evt", StreamFormat::Binary), ("s.csv", StreamFormat::Csv)] {
            let path = dir.path().join(name);
            write_stream(&events, &header, &path, fmt).unwrap();
            let (h, back) = read_stream(&path, fmt).unwrap();
            prop_assert_eq!(&back, &events);
            prop_assert_eq!(h, header);
        }
    }

    #[test]
    fn ccim_windows_tile_the_stream(events in sorted_events(400), ne in 1usize..50) {
        let mut sampler = CcimSampler::new(&events, ne).unwrap();
        let mut joined = Vec::new();
        for s in sampler.by_ref() {
            prop_assert_eq!(s.events.len(), ne);
            joined.extend_from_slice(s.events);
        }
        joined.extend_from_slice(sampler.remainder());
        prop_assert_eq!(&joined, &events);
        let last_start = events.len().checked_sub(ne);
        if let Some(start) = last_start {
            prop_assert!(sample_ccim(&events, ne, start).is_ok());
        }
        let past = last_start.map_or(0, |s| s + 1);
        let exhausted = matches!(sample_ccim(&events, ne, past), Err(alert_core::Error::Exhausted { .. }));
        prop_assert!(exhausted);
    }

    #[test]
    fn ctim_windows_cover_each_event_once(events in sorted_events(400), dt in 1u64..20_000) {
        let start = events.first().map_or(0, |e| e.t);
        let mut total = 0;
        for s in CtimSampler::new(&events, dt, start).unwrap() {
            let (lo, hi) = (s.window.start_time, s.window.start_time + dt);
            prop_assert!(s.events.iter().all(|e| e.t >= lo && e.t < hi));
            total += s.events.len();
        }
        prop_assert_eq!(total, events.len());
        let whole = sample_ctim(&events, u64::MAX / 2, 0).unwrap();
        prop_assert_eq!(whole.events.len(), events.len());
    }
}
