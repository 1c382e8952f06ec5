"""Shared drivers for the registry property checks."""
import random
import threading
import time

from polyglot_asr.errors import BudgetExhausted
from polyglot_asr.registry import ModelKey, ModelManifest, ModelRegistry


class ReferenceLRU:
    """Sequential model of the registry's accounting, written from the rules alone."""

    def __init__(self, budget, sizes):
        self.budget = budget
        self.sizes = dict(sizes)
        self.order = {k: i for i, k in enumerate(self.sizes)}
        self.loaded = {}  # key -> last_used
        self.leases = {k: 0 for k in self.sizes}
        self.t = 0
        self.loads = self.evictions = self.hits = self.misses = 0

    def acquire(self, key):
        self.t += 1
        if key in self.loaded:
            self.hits += 1
        else:
            used = sum(self.sizes[k] for k in self.loaded)
            idle = sorted((k for k in self.loaded if self.leases[k] == 0),
                          key=lambda k: (self.loaded[k], self.order[k]))
            victims = []
            while used + self.sizes[key] > self.budget:
                if not idle:
                    self.t -= 1
                    return False
                v = idle.pop(0)
                victims.append(v)
                used -= self.sizes[v]
            for v in victims:
                del self.loaded[v]
                self.evictions += 1
            self.misses += 1
            self.loads += 1
        self.loaded[key] = self.t
        self.leases[key] += 1
        return True

    def release(self, key):
        self.leases[key] -= 1


def manifests_for(sizes):
    return [ModelManifest(ModelKey(*k.split("/")), "/nonexistent", s) for k, s in sizes.items()]


def sequential_property_run(seed, n_ops):
    """Random acquire/release sequence checked op-by-op against ReferenceLRU.

    Returns the number of ops checked; raises AssertionError on any divergence.
    """
    rng = random.Random(seed)
    n_models = rng.randint(2, 8)
    budget = rng.randint(100, 1000)
    sizes = {f"l{i}/a{i}": rng.randint(1, budget) for i in range(n_models)}
    reg = ModelRegistry(budget, check_artifacts=False)
    for m in manifests_for(sizes):
        reg.register(m)
    ref = ReferenceLRU(budget, sizes)
    held = []
    for _ in range(n_ops):
        if held and rng.random() < 0.45:
            handle = held.pop(rng.randrange(len(held)))
            handle.release()
            if rng.random() < 0.1:
                handle.release()  # idempotent
            ref.release(str(handle.key))
        else:
            key = rng.choice(list(sizes))
            ok = ref.acquire(key)
            try:
                held.append(reg.acquire(key.split("/")))
                assert ok, f"registry loaded {key} where the reference could not"
            except BudgetExhausted:
                assert not ok, f"registry refused {key} where the reference fit it"
        state = reg.stats()
        assert state.used_bytes <= budget
        assert state.loaded_keys == {ModelKey(*k.split("/")) for k in ref.loaded}
        for h in held:
            assert h.key in state.loaded_keys
        assert (state.loads, state.evictions, state.hits, state.misses) == (
            ref.loads, ref.evictions, ref.hits, ref.misses)
    return n_ops


def concurrent_stress(seed, threads=8, ops_per_thread=150):
    """Threads acquire/release at random while a monitor checks invariants."""
    rng = random.Random(seed)
    budget = 1000
    sizes = {f"l{i}/a{i}": rng.randint(100, 400) for i in range(8)}
    violations = []
    reg_box = {}

    def loader(manifest):
        time.sleep(0.0005)
        st = reg_box["reg"].stats()
        if st.used_bytes > budget:
            violations.append(("budget during load", st.used_bytes))
        return object()

    reg = ModelRegistry(budget, loader=loader, check_artifacts=False)
    reg_box["reg"] = reg
    for m in manifests_for(sizes):
        reg.register(m)
    stop = threading.Event()

    def worker(wseed):
        r = random.Random(wseed)
        mine = []
        for _ in range(ops_per_thread):
            if mine and (r.random() < 0.5 or len(mine) >= 2):
                mine.pop(r.randrange(len(mine))).release()
            else:
                try:
                    mine.append(reg.acquire(r.choice(list(sizes)).split("/")))
                except BudgetExhausted:
                    pass
            st = reg.stats()
            for h in mine:
                if h.key not in st.loaded_keys:
                    violations.append(("leased model evicted", h.key))
        for h in mine:
            h.release()

    def monitor():
        while not stop.is_set():
            st = reg.stats()
            if st.used_bytes > budget:
                violations.append(("budget", st.used_bytes))

    mon = threading.Thread(target=monitor)
    mon.start()
    ws = [threading.Thread(target=worker, args=(seed * 100 + i,)) for i in range(threads)]
    for w in ws:
        w.start()
    for w in ws:
        w.join()
    stop.set()
    mon.join()
    assert reg.active_leases() == 0
    return violations, reg.stats()


def single_flight(n_threads=32, load_s=0.05):
    """``n_threads`` concurrent acquires of one cold key -> (loads, handles)."""
    calls = []
    lock = threading.Lock()

    def loader(manifest):
        with lock:
            calls.append(manifest.key)
        time.sleep(load_s)
        return {"model": str(manifest.key)}

    reg = ModelRegistry(1000, loader=loader, check_artifacts=False)
    reg.register(ModelManifest(ModelKey("en", "india"), "/x", 150))
    barrier = threading.Barrier(n_threads)
    handles = [None] * n_threads

    def go(i):
        barrier.wait()
        handles[i] = reg.acquire(("en", "india"))

    ts = [threading.Thread(target=go, args=(i,)) for i in range(n_threads)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    return reg, calls, handles
