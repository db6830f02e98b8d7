import datetime as dtm

import pytz

def get_now_datetime_as_string(tz_name: str = 'UTC') -> str:
    """ E.g. 2022-06-11--12-21-37 """
    return dtm.datetime.now(tz=pytz.timezone(tz_name)).strftime("%Y-%m-%d--%H-%M-%S")


def parse_epoch_seconds(raw: str) -> float:
    """ Ground-truth files carry either epoch seconds or an ISO-ish timestamp (assumed UTC). """
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        parsed = dtm.datetime.fromisoformat(raw)
        if parsed.tzinfo is None:
            parsed = pytz.utc.localize(parsed)
        return parsed.timestamp()
