"""Alert persistence with flood protection.

Alerts carrying a deployment id deduplicate: an identical
(source, deployment, metric) alert within the coalesce window returns the
existing alert instead of appending a new one. Ad-hoc alerts (no
deployment) always append.
"""

from __future__ import annotations

from datetime import datetime, timedelta

from .canonical import content_hash, format_timestamp
from .entities import ALERT_SOURCES, Alert, _require, _utcnow
from .store import FileStore

KIND_ALERT = "alert"
COALESCE_WINDOW = timedelta(minutes=10)


class AlertBook:
    def __init__(self, store: FileStore):
        self._store = store

    def raise_alert(self, source: str, message: str, deployment_id: str | None = None,
                    metric: str | None = None, details: dict | None = None,
                    now: datetime | None = None) -> Alert:
        _require(source, ALERT_SOURCES, "alert source")
        now = now or _utcnow()
        if deployment_id is not None:
            existing = self._recent_duplicate(source, deployment_id, metric, now)
            if existing is not None:
                return existing
        seq = self._store.next_seq("alert")
        alert = Alert(
            alert_id=content_hash({"source": source, "deployment": deployment_id,
                                   "metric": metric, "fired_at": format_timestamp(now),
                                   "seq": seq}),
            source=source,
            deployment_id=deployment_id,
            metric=metric,
            message=message,
            details=details or {},
            fired_at=now,
        )
        self._store.put_meta(KIND_ALERT, alert.alert_id, alert.to_doc())
        return alert

    def _recent_duplicate(self, source, deployment_id, metric, now) -> Alert | None:
        newest = None
        for alert in self.list_alerts(deployment_id=deployment_id, source=source):
            if alert.metric != metric:
                continue
            if now - alert.fired_at <= COALESCE_WINDOW:
                if newest is None or alert.fired_at > newest.fired_at:
                    newest = alert
        return newest

    def list_alerts(self, deployment_id: str | None = None,
                    source: str | None = None) -> list[Alert]:
        out = []
        for doc in self._store.iter_meta(KIND_ALERT):
            alert = Alert.from_doc(doc)
            if deployment_id is not None and alert.deployment_id != deployment_id:
                continue
            if source is not None and alert.source != source:
                continue
            out.append(alert)
        out.sort(key=lambda a: (a.fired_at, a.alert_id))
        return out
