# Copyright 2026 The Varprop Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Analytic uncertainty propagation for feedforward networks.

The heavy lifting lives in the compiled extension ``_varprop``. In an
installed wheel it sits inside this package; in a plain CMake build tree
it is placed next to the package directory instead.
"""

try:
    from ._varprop import *  # noqa: F401,F403
    from ._varprop import __doc__  # noqa: F401
except ImportError:  # pragma: no cover - build-tree layout
    from _varprop import *  # noqa: F401,F403
    from _varprop import __doc__  # noqa: F401
