from __future__ import annotations

import bz2
import logging
import os

import httpx

from basiskit.exceptions import DatasetDownloadError
from basiskit.libsvm import DATASETS

logger = logging.getLogger(__name__)


class LibSVMClient:
    """
    Downloads binary classification datasets from the LibSVM collection.
    """

    def __init__(self, base_url: str = 'https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary', debug: bool = False):
        self._base_url = base_url
        self._session = httpx.Client(timeout=httpx.Timeout(5.0, read=120.0), follow_redirects=True)
        self.debug = debug

    @property
    def base_url(self):
        return self._base_url

    @property
    def header(self):
        return {
            'Accept': '*/*',
            'User-Agent': 'basiskit',
        }

    def fetch(self, name: str, dest_dir: str = 'data') -> str:
        """
        Saves the named dataset as plain LibSVM text and returns its path.
        """
        info = DATASETS.get(name)
        if info is None:
            raise DatasetDownloadError(f'unknown dataset {name}; known: {", ".join(DATASETS)}')
        try:
            content = self._get(info.filename, headers=self.header)
        except DatasetDownloadError as e:
            raise DatasetDownloadError(f'failed fetch of {name} [{e}]')

        if info.filename.endswith('.bz2'):
            try:
                content = bz2.decompress(content)
            except (OSError, ValueError) as e:
                raise DatasetDownloadError(f'failed to decompress {info.filename} [{e}]')

        os.makedirs(dest_dir, exist_ok=True)
        path = os.path.join(dest_dir, info.filename.replace('.bz2', ''))
        with open(path, mode='wb') as f:
            f.write(content)
        logger.info(f'saved {name} to {path} ({len(content)} bytes)')
        return path

    def _get(self, path: str, *arg, **kwargs) -> bytes:
        return self._request('GET', path, *arg, **kwargs)

    def _request(self, method: str, path: str, *arg, **kwargs) -> bytes:
        url = f'{self.base_url}/{path}'
        try:
            response = self._session.request(method, url, *arg, **kwargs)
        except httpx.HTTPError as e:
            raise DatasetDownloadError(f'failed {method} for {url} [{e}]')
        if self.debug:
            logger.debug(f'{method} {url} -> {response.status_code}')
        if response.status_code != 200:
            raise DatasetDownloadError(f'failed {method} for {url} status [{response.status_code}]')
        return response.content
