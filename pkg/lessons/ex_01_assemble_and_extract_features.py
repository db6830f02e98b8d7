import attr
import pandas as pd

from nids.assembler import assemble
from nids.host_features import HostWindowState, brute_force_host_features
from nids.normalization import encode_all, fit_normalization
from sim.traffic import synthetic_packets

if __name__ == "__main__":
    packets = synthetic_packets(n_flows=60, seed=7)
    sessions, stats = assemble(packets)
    print(f"{len(packets)} packets -> {len(sessions)} sessions, terminations {dict(stats.terminations)}")

    window = HostWindowState()
    records = list(window.extract_all(sessions))
    assert [r.host for r in records] == brute_force_host_features(sessions)

    data = pd.DataFrame([
        {
            'session_id': r.session.session_id,
            'proto': str(r.session.protocol),
            'service': r.session.service,
            'conn_state': str(r.session.conn_state),
            'src_bytes': r.session.src_bytes,
            'dst_bytes': r.session.dst_bytes,
            **attr.asdict(r.host),
        }
        for r in records
    ])
    print(data.head(20))

    spec = fit_normalization(records)
    vectors = encode_all(records, spec)
    print(f"spec {spec.spec_version}: {spec.dimension} components")
    print(pd.DataFrame(vectors, columns=spec.layout()).describe().round(3).T)
