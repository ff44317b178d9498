"""
warpiso - 翘曲积空间等周不等式数值验证工具

在度量 ds² = dr²/f²(r) + r²·dS² 下扫描稳定性函数 Φ(r)，
对测地球面的等距扰动做阶律验证，并在 Φ < 0 处生成可复核的反例证书。

License: MIT
"""

__version__ = "1.0.0"
__author__ = "warpiso contributors"
__email__ = ""
__license__ = "MIT"
__description__ = "warpiso - 翘曲积空间等周不等式数值验证工具"
__url__ = ""

# 项目元信息
PROJECT_NAME = "warpiso"
PROJECT_DESCRIPTION = "翘曲积空间等周不等式数值验证工具"
PROJECT_VERSION = __version__
PROJECT_AUTHOR = __author__
PROJECT_URL = __url__

# 支持的Python版本
PYTHON_REQUIRES = ">=3.8"

__all__ = [
    "__version__",
    "__author__",
    "__license__",
    "__description__",
    "__url__",
    "PROJECT_NAME",
    "PROJECT_DESCRIPTION",
    "PROJECT_VERSION",
    "PROJECT_AUTHOR",
    "PROJECT_URL",
    "PYTHON_REQUIRES"
]
