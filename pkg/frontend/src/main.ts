import { GatewayApi } from "./api.js";
import { mountConsole } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = mountConsole(new GatewayApi(""), root);
  void app.start();
}
