// App entry: scenario builder on the left, run monitor + compare on the
// right, against the run service (proxied in dev).

import { ApiClient } from "./api";
import { BuilderView } from "./views/builder";
import { MonitorView } from "./views/monitor";

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const app = document.getElementById("app");
  if (!app) return;

  const city = await api.cityCells();
  const monitor = new MonitorView(document, api, city.cells);
  const builder = new BuilderView(document, api, {
    onLaunched: (pair) => {
      void (async () => {
        const [treated, control] = await Promise.all([
          monitor.track(pair.treatedId),
          monitor.track(pair.controlId),
        ]);
        if (treated.status === "done" && control.status === "done") {
          await monitor.showCompare(pair.treatedId, pair.controlId);
        }
      })();
    },
  });

  const header = document.createElement("header");
  header.innerHTML = `<h1>${city.name} scenario explorer</h1>`;
  app.appendChild(header);
  app.appendChild(builder.root);
  app.appendChild(monitor.root);
  await builder.loadPresets();
}

void boot();
