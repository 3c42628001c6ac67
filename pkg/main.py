import os
import subprocess
import sys

from config.settings import get_settings

service_type = os.environ.get("SERVICE_TYPE", "bench")

if service_type == "web":
    s = get_settings()
    subprocess.run([
        sys.executable, "-m", "uvicorn",
        "api.main:app",
        "--host", s.web_host,
        "--port", os.environ.get("PORT", str(s.web_port)),
    ], check=True)
else:
    from bench.cli import main

    sys.exit(main(sys.argv[1:]))
