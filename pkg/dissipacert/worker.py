"""Background Monte Carlo sweeps over consistent systems."""
import asyncio
import logging
from typing import List, Optional

from .oracle import SampleReport, validate_certificate
from .symmat import DEFAULT_TOLERANCES, SymMat, Tolerances
from .sysmodel import DataRecord, NoiseSpec, SupplyRate

logger = logging.getLogger(__name__)


class SweepWorker:
    """Falsification sweep of one storage function, split into seeded batches."""

    def __init__(self, data: DataRecord, spec: NoiseSpec, supply: SupplyRate, storage: SymMat,
                 tol: Tolerances = DEFAULT_TOLERANCES, batch_size: int = 250):
        self.data = data
        self.spec = spec
        self.supply = supply
        self.storage = storage
        self.tol = tol
        self.batch_size = batch_size

    async def run_once(self, seed: int) -> SampleReport:
        return await asyncio.to_thread(validate_certificate, self.data, self.spec, self.supply,
                                       self.storage, self.batch_size, seed, self.tol)

    async def run(self, samples: int, seed: int = 0,
                  concurrency: Optional[int] = None) -> SampleReport:
        batches = max(1, -(-samples // self.batch_size))
        seeds: List[int] = [seed + k for k in range(batches)]
        limit = asyncio.Semaphore(concurrency or batches)

        async def bounded(s: int) -> SampleReport:
            async with limit:
                return await self.run_once(s)

        reports = await asyncio.gather(*(bounded(s) for s in seeds))
        merged = SampleReport()
        for report in reports:
            merged = merged.merge(report)
        logger.info("sweep of %d batches: %d systems, worst margin %g",
                    batches, merged.accepted, merged.worst_margin)
        return merged
