from nids.pipeline.engine import RunSummary, run_pipeline, stage_busy_ratio
from nids.pipeline.records import SinkRecord, TimelineEvent, iter_session_log, read_session_log, write_session_log
from nids.pipeline.replay import TokenBucket, replay
from nids.pipeline.sinks import EmbeddedStoreSink, JsonlSink, NullSink, Sink, make_sink
